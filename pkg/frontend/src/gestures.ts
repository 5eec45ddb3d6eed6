// Pure gesture-to-raw-event mapping: every user action produces exactly one
// raw event document, keeping the DOM layer free of protocol knowledge.

import type { RawEventDoc } from "./protocol.js";

function canvasPosition(x: number, y: number): [number, number] {
  return [Math.round(x), Math.round(y)];
}

export function paletteDrop(item: string, x: number, y: number): RawEventDoc {
  return {
    source: "Toolbar",
    kind: "Drop",
    position: canvasPosition(x, y),
    payload: { palette_item: item },
  };
}

export function symbolClick(nodeId: string, additive = false): RawEventDoc {
  const payload: Record<string, string> = { target: nodeId };
  if (additive) {
    payload.additive = "true";
  }
  return { source: "ModellingPane", kind: "Click", position: null, payload };
}

export function canvasClick(x: number, y: number): RawEventDoc {
  return { source: "ModellingPane", kind: "Click", position: canvasPosition(x, y), payload: {} };
}

export function symbolDragEnd(nodeId: string, x: number, y: number): RawEventDoc {
  return {
    source: "ModellingPane",
    kind: "DragEnd",
    position: canvasPosition(x, y),
    payload: { target: nodeId },
  };
}

export function portDrag(
  fromNode: string,
  fromPort: string,
  toNode: string,
  toPort: string,
): RawEventDoc {
  return {
    source: "ModellingPane",
    kind: "DragEnd",
    position: null,
    payload: { from_node: fromNode, from_port: fromPort, to_node: toNode, to_port: toPort },
  };
}

export function fieldEdit(nodeId: string, field: string, value: string): RawEventDoc {
  return {
    source: "PropertyInspector",
    kind: "FieldEdit",
    position: null,
    payload: { target: nodeId, field, value },
  };
}

export function deleteCommand(nodeId: string): RawEventDoc {
  return {
    source: "ModellingPane",
    kind: "KeyCommand",
    position: null,
    payload: { command: "delete", target: nodeId },
  };
}

export function groupCommand(members: string[]): RawEventDoc {
  return {
    source: "ModellingPane",
    kind: "KeyCommand",
    position: null,
    payload: { command: "group", members: members.join(",") },
  };
}

export function filterToggle(
  filterId: string,
  filterKind: "by-kind" | "by-layer" | "by-meta",
  arg: string,
  active: boolean,
): RawEventDoc {
  return {
    source: "External",
    kind: "Click",
    position: null,
    payload: {
      filter: filterId,
      filter_kind: filterKind,
      arg,
      active: active ? "true" : "false",
    },
  };
}

export function collapseToggle(nodeId: string): RawEventDoc {
  return {
    source: "ModellingPane",
    kind: "Click",
    position: null,
    payload: { toggle_submodel: nodeId },
  };
}
