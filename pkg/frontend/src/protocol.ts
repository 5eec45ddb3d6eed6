// Wire types for the nbmvc session protocol. These mirror the JSON the
// service emits; the mirror and client treat them as plain data.

export type ScalarValue = null | boolean | number | string;

export interface SymbolDoc {
  id: string;
  node: string;
  kind: string;
  glyph: string;
  label: string;
  x: number;
  y: number;
  w: number;
  h: number;
  layer: string;
  group: string | null;
  collapsed: boolean;
  parent: string | null;
  ports: [string, string][]; // (name, role): "out" drives, "in" consumes
}

export interface BindingDoc {
  id: string;
  node: string;
  from_symbol: string;
  from_port: string;
  to_symbol: string;
  to_port: string;
}

export interface LayerDoc {
  id: string;
  name: string;
  visible: boolean;
}

export interface FilterDoc {
  id: string;
  kind: string;
  arg: unknown;
  active: boolean;
}

export interface SceneDoc {
  symbols: SymbolDoc[];
  bindings: BindingDoc[];
  layers: LayerDoc[];
  filters: FilterDoc[];
  groups: [string, string[]][];
  visible: string[];
}

export type PatchDelta =
  | { op: "remove_binding"; id: string }
  | { op: "remove_symbol"; id: string }
  | { op: "add_symbol"; symbol: SymbolDoc }
  | { op: "add_binding"; binding: BindingDoc }
  | { op: "move_symbol"; id: string; x: number; y: number }
  | { op: "relabel"; id: string; label: string }
  | { op: "visibility"; visible: string[]; layers: LayerDoc[]; filters: FilterDoc[] };

export interface WizardFieldDoc {
  name: string;
  type: "text" | "int" | "float" | "bool";
  default: ScalarValue;
  constraint: Record<string, unknown> | null;
  required: boolean;
}

export interface WizardSpecDoc {
  id: string;
  produced_for: string;
  fields: WizardFieldDoc[];
}

export interface PaletteEntryDoc {
  item: string;
  glyph: string;
  kind: string;
  label: string;
  wizard: WizardSpecDoc | null;
}

export interface SnapshotBody {
  session: string;
  project: string;
  domain: string;
  tree: unknown;
  version: number;
  scene: SceneDoc;
  scene_hash: string;
  palette: PaletteEntryDoc[];
  wizards: WizardSpecDoc[];
  undo: { can_undo: boolean; can_redo: boolean };
}

export interface AppliedBody {
  change_events: unknown[];
  view_patch: PatchDelta[];
  version: number;
  scene_hash: string;
  steps: unknown[];
}

export interface DiagnosticDoc {
  severity: string;
  node: string | null;
  rule: string;
  message: string;
}

export interface ArtifactDoc {
  path: string;
  language: string;
  content: string;
  hash: string;
}

export interface Envelope<T = Record<string, unknown>> {
  type: string;
  session: string | null;
  seq: number;
  body: T;
}

export interface RawEventDoc {
  source: "ModellingPane" | "Toolbar" | "PropertyInspector" | "External";
  kind: "Drop" | "Click" | "DragEnd" | "FieldEdit" | "KeyCommand";
  position: [number, number] | null;
  payload: Record<string, string>;
}
