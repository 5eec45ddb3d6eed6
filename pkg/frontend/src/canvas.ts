// The modelling pane: an SVG rendering of the scene mirror plus the gesture
// wiring that turns pointer work into raw events. Rendering is a pure
// function of the mirror; nothing here touches model state.

import {
  canvasClick,
  collapseToggle,
  portDrag,
  symbolClick,
  symbolDragEnd,
} from "./gestures.js";
import type { SceneMirror } from "./mirror.js";
import type { RawEventDoc, SymbolDoc } from "./protocol.js";

const SVG_NS = "http://www.w3.org/2000/svg";

const GLYPH_FILL: Record<string, string> = {
  device: "#2b4a6f",
  pin: "#3c6e8f",
  port: "#3c6e8f",
  composite: "#5a3d7a",
  "instance.io": "#2b4a6f",
  "instance.macro": "#6f5a2b",
  unknown: "#555555",
};

interface PendingWire {
  fromNode: string;
  fromPort: string;
  line: SVGLineElement;
}

export class CanvasPane {
  readonly root: SVGSVGElement;
  private emit: (event: RawEventDoc) => void;
  private dragSymbol: { id: string; dx: number; dy: number; moved: boolean } | null = null;
  private pendingWire: PendingWire | null = null;
  private bindingsEnabled = true;

  constructor(container: HTMLElement, emit: (event: RawEventDoc) => void) {
    this.emit = emit;
    this.root = document.createElementNS(SVG_NS, "svg");
    this.root.setAttribute("class", "canvas");
    this.root.setAttribute("width", "100%");
    this.root.setAttribute("height", "100%");
    container.appendChild(this.root);
    this.root.addEventListener("pointerdown", (event) => {
      if (event.target === this.root) {
        const point = this.toCanvas(event);
        this.emit(canvasClick(point.x, point.y));
      }
    });
    this.root.addEventListener("pointermove", (event) => this.onPointerMove(event));
    this.root.addEventListener("pointerup", (event) => this.onPointerUp(event));
  }

  setBindingsEnabled(enabled: boolean): void {
    this.bindingsEnabled = enabled;
  }

  toCanvas(event: PointerEvent | DragEvent): { x: number; y: number } {
    const rect = this.root.getBoundingClientRect();
    return { x: event.clientX - rect.left, y: event.clientY - rect.top };
  }

  render(mirror: SceneMirror, selection: ReadonlySet<string>): void {
    this.root.textContent = "";
    const visible = mirror.visible;
    for (const binding of mirror.bindings.values()) {
      const from = mirror.symbols.get(binding.from_symbol);
      const to = mirror.symbols.get(binding.to_symbol);
      if (!from || !to || !visible.has(from.id) || !visible.has(to.id)) {
        continue;
      }
      const line = document.createElementNS(SVG_NS, "line");
      const start = portPoint(from, binding.from_port);
      const end = portPoint(to, binding.to_port);
      line.setAttribute("x1", String(start.x));
      line.setAttribute("y1", String(start.y));
      line.setAttribute("x2", String(end.x));
      line.setAttribute("y2", String(end.y));
      line.setAttribute("class", "binding");
      this.root.appendChild(line);
    }
    const ordered = [...mirror.symbols.values()].sort((a, b) =>
      a.id < b.id ? -1 : a.id > b.id ? 1 : 0,
    );
    for (const symbol of ordered) {
      if (!visible.has(symbol.id)) {
        continue;
      }
      this.root.appendChild(this.renderSymbol(symbol, selection.has(symbol.id)));
    }
  }

  private renderSymbol(symbol: SymbolDoc, selected: boolean): SVGGElement {
    const group = document.createElementNS(SVG_NS, "g");
    group.setAttribute("transform", `translate(${symbol.x},${symbol.y})`);
    group.setAttribute("data-node", symbol.id);

    const body = document.createElementNS(SVG_NS, "rect");
    body.setAttribute("width", String(symbol.w));
    body.setAttribute("height", String(symbol.h));
    body.setAttribute("rx", "6");
    body.setAttribute("fill", GLYPH_FILL[symbol.glyph] ?? "#43604a");
    body.setAttribute("class", "symbol" + (selected ? " selected" : ""));
    group.appendChild(body);

    const label = document.createElementNS(SVG_NS, "text");
    label.setAttribute("x", String(symbol.w / 2));
    label.setAttribute("y", String(symbol.h / 2 + 4));
    label.setAttribute("text-anchor", "middle");
    label.setAttribute("class", "symbol-label");
    label.textContent = symbol.collapsed ? `▸ ${symbol.label}` : symbol.label;
    group.appendChild(label);

    if (symbol.glyph === "unknown") {
      body.setAttribute("stroke-dasharray", "4 2");
    }

    body.addEventListener("pointerdown", (event) => {
      event.stopPropagation();
      this.dragSymbol = {
        id: symbol.id,
        dx: event.offsetX - symbol.x,
        dy: event.offsetY - symbol.y,
        moved: false,
      };
      this.emit(symbolClick(symbol.id, event.shiftKey));
    });
    body.addEventListener("dblclick", (event) => {
      event.stopPropagation();
      if (symbol.glyph === "composite" || symbol.glyph === "device") {
        this.emit(collapseToggle(symbol.id));
      }
    });

    for (const [name, role] of symbol.ports) {
      const sameSide = symbol.ports.filter(([, r]) => r === role);
      const index = sameSide.findIndex(([n]) => n === name);
      const dot = document.createElementNS(SVG_NS, "circle");
      const point = portOffset(symbol, name, role, index, sameSide.length);
      dot.setAttribute("cx", String(point.x));
      dot.setAttribute("cy", String(point.y));
      dot.setAttribute("r", "5");
      dot.setAttribute("class", `port-dot ${role}`);
      dot.setAttribute("data-port", name);
      const title = document.createElementNS(SVG_NS, "title");
      title.textContent = name;
      dot.appendChild(title);
      dot.addEventListener("pointerdown", (event) => {
        event.stopPropagation();
        if (!this.bindingsEnabled || role !== "out") {
          return;
        }
        const line = document.createElementNS(SVG_NS, "line");
        line.setAttribute("class", "binding pending");
        const start = portPoint(symbol, name);
        line.setAttribute("x1", String(start.x));
        line.setAttribute("y1", String(start.y));
        line.setAttribute("x2", String(start.x));
        line.setAttribute("y2", String(start.y));
        this.root.appendChild(line);
        this.pendingWire = { fromNode: symbol.id, fromPort: name, line };
      });
      dot.addEventListener("pointerup", (event) => {
        if (this.pendingWire && this.bindingsEnabled) {
          event.stopPropagation();
          const wire = this.pendingWire;
          this.clearPendingWire();
          if (wire.fromNode !== symbol.id || wire.fromPort !== name) {
            this.emit(portDrag(wire.fromNode, wire.fromPort, symbol.id, name));
          }
        }
      });
      group.appendChild(dot);
    }
    return group;
  }

  private onPointerMove(event: PointerEvent): void {
    if (this.pendingWire) {
      const point = this.toCanvas(event);
      this.pendingWire.line.setAttribute("x2", String(point.x));
      this.pendingWire.line.setAttribute("y2", String(point.y));
    } else if (this.dragSymbol) {
      this.dragSymbol.moved = true;
      const node = this.root.querySelector(`g[data-node="${this.dragSymbol.id}"]`);
      if (node) {
        const point = this.toCanvas(event);
        node.setAttribute(
          "transform",
          `translate(${point.x - this.dragSymbol.dx},${point.y - this.dragSymbol.dy})`,
        );
      }
    }
  }

  private onPointerUp(event: PointerEvent): void {
    if (this.pendingWire) {
      this.clearPendingWire();
      return;
    }
    if (this.dragSymbol) {
      const drag = this.dragSymbol;
      this.dragSymbol = null;
      if (drag.moved) {
        const point = this.toCanvas(event);
        this.emit(symbolDragEnd(drag.id, point.x - drag.dx, point.y - drag.dy));
      }
    }
  }

  private clearPendingWire(): void {
    this.pendingWire?.line.remove();
    this.pendingWire = null;
  }
}

function portOffset(
  symbol: SymbolDoc,
  _name: string,
  role: string,
  index: number,
  count: number,
): { x: number; y: number } {
  const x = role === "out" ? symbol.w : 0;
  const y = (symbol.h * (index + 1)) / (count + 1);
  return { x, y };
}

function portPoint(symbol: SymbolDoc, portName: string): { x: number; y: number } {
  const entry = symbol.ports.find(([name]) => name === portName);
  const role = entry ? entry[1] : "out";
  const sameSide = symbol.ports.filter(([, r]) => r === role);
  const index = Math.max(0, sameSide.findIndex(([n]) => n === portName));
  const offset = portOffset(symbol, portName, role, index, Math.max(1, sameSide.length));
  return { x: symbol.x + offset.x, y: symbol.y + offset.y };
}
