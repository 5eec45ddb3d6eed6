// The scene mirror: the client's only copy of the view state. It is fed by
// snapshots and server view patches and never mutated locally; the canonical
// form (and thus the hash) must match the server byte for byte, so dev mode
// can verify fidelity after every applied cycle.

import type {
  BindingDoc,
  FilterDoc,
  LayerDoc,
  PatchDelta,
  SceneDoc,
  SymbolDoc,
} from "./protocol.js";
import { sha256Hex } from "./sha256.js";

// Canonical JSON matching Python's json.dumps(..., sort_keys=True,
// separators=(",", ":"), ensure_ascii=True): object keys sorted, compact
// separators, non-ASCII escaped as \uxxxx, integral floats already arrive
// as ints on the wire.
export function canonicalJson(value: unknown): string {
  if (value === null) {
    return "null";
  }
  if (typeof value === "boolean") {
    return value ? "true" : "false";
  }
  if (typeof value === "number") {
    if (!Number.isFinite(value)) {
      throw new Error("non-finite numbers have no canonical form");
    }
    return Number.isInteger(value) ? String(value) : String(value);
  }
  if (typeof value === "string") {
    return canonicalString(value);
  }
  if (Array.isArray(value)) {
    return "[" + value.map(canonicalJson).join(",") + "]";
  }
  if (typeof value === "object") {
    const record = value as Record<string, unknown>;
    const keys = Object.keys(record).sort();
    const parts = keys.map((key) => canonicalString(key) + ":" + canonicalJson(record[key]));
    return "{" + parts.join(",") + "}";
  }
  throw new Error(`cannot canonicalize ${typeof value}`);
}

const SHORT_ESCAPES: Record<string, string> = {
  "\b": "\\b",
  "\t": "\\t",
  "\n": "\\n",
  "\f": "\\f",
  "\r": "\\r",
  '"': '\\"',
  "\\": "\\\\",
};

function canonicalString(text: string): string {
  let out = '"';
  for (let i = 0; i < text.length; i++) {
    const ch = text[i];
    const code = text.charCodeAt(i);
    if (SHORT_ESCAPES[ch] !== undefined) {
      out += SHORT_ESCAPES[ch];
    } else if (code < 0x20 || code > 0x7e) {
      out += "\\u" + code.toString(16).padStart(4, "0");
    } else {
      out += ch;
    }
  }
  return out + '"';
}

export class SceneMirror {
  symbols = new Map<string, SymbolDoc>();
  bindings = new Map<string, BindingDoc>();
  layers = new Map<string, LayerDoc>();
  filters = new Map<string, FilterDoc>();
  visible = new Set<string>();

  loadSnapshot(scene: SceneDoc): void {
    this.symbols = new Map(scene.symbols.map((s) => [s.id, s]));
    this.bindings = new Map(scene.bindings.map((b) => [b.id, b]));
    this.layers = new Map(scene.layers.map((l) => [l.id, l]));
    this.filters = new Map(scene.filters.map((f) => [f.id, f]));
    this.visible = new Set(scene.visible);
  }

  applyPatch(deltas: PatchDelta[]): void {
    for (const delta of deltas) {
      switch (delta.op) {
        case "remove_binding":
          this.bindings.delete(delta.id);
          break;
        case "remove_symbol":
          this.symbols.delete(delta.id);
          break;
        case "add_symbol":
          this.symbols.set(delta.symbol.id, delta.symbol);
          break;
        case "add_binding":
          this.bindings.set(delta.binding.id, delta.binding);
          break;
        case "move_symbol": {
          const symbol = this.symbols.get(delta.id);
          if (symbol) {
            this.symbols.set(delta.id, { ...symbol, x: delta.x, y: delta.y });
          }
          break;
        }
        case "relabel": {
          const symbol = this.symbols.get(delta.id);
          if (symbol) {
            this.symbols.set(delta.id, { ...symbol, label: delta.label });
          }
          break;
        }
        case "visibility":
          this.visible = new Set(delta.visible);
          this.layers = new Map(delta.layers.map((l) => [l.id, l]));
          this.filters = new Map(delta.filters.map((f) => [f.id, f]));
          break;
        default: {
          const exhaustive: never = delta;
          throw new Error(`unknown patch op ${(exhaustive as PatchDelta).op}`);
        }
      }
    }
  }

  // group membership is derived from symbols, exactly as on the server
  groups(): [string, string[]][] {
    const grouped = new Map<string, string[]>();
    for (const symbol of this.symbols.values()) {
      if (symbol.group) {
        const members = grouped.get(symbol.group) ?? [];
        members.push(symbol.id);
        grouped.set(symbol.group, members);
      }
    }
    return [...grouped.entries()]
      .map(([gid, members]) => [gid, members.sort()] as [string, string[]])
      .sort((a, b) => (a[0] < b[0] ? -1 : a[0] > b[0] ? 1 : 0));
  }

  toSceneDoc(): SceneDoc {
    const byId = <T extends { id: string }>(map: Map<string, T>): T[] =>
      [...map.values()].sort((a, b) => (a.id < b.id ? -1 : a.id > b.id ? 1 : 0));
    return {
      symbols: byId(this.symbols),
      bindings: byId(this.bindings),
      layers: byId(this.layers),
      filters: byId(this.filters),
      groups: this.groups(),
      visible: [...this.visible].sort(),
    };
  }

  hash(): string {
    return sha256Hex(canonicalJson(this.toSceneDoc()));
  }
}
