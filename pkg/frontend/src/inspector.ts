// Property inspector: editable fields for the primary selection. Edits emit
// FieldEdit raw events; the pane rerenders only from the mirror, so a value
// shows up once the server applied it.

import { fieldEdit } from "./gestures.js";
import type { RawEventDoc, SymbolDoc } from "./protocol.js";

// editable fields per node kind, mirroring the built-in profiles
const FIELDS: Record<string, string[]> = {
  "io.project": ["name"],
  "io.device": ["name"],
  "io.pin": ["name", "dir", "type", "addr"],
  macro: ["name"],
  "macro.port": ["name", "dir", "type"],
  "macro.op": ["name", "const"],
  "macro.composite": ["name"],
  "task.app": ["name"],
  "task.instance": ["name"],
  "task.composite": ["name"],
  "task.port": ["name"],
};

export class Inspector {
  private body: HTMLElement;

  constructor(container: HTMLElement, private emit: (event: RawEventDoc) => void) {
    const heading = document.createElement("h2");
    heading.textContent = "Inspector";
    container.appendChild(heading);
    this.body = document.createElement("div");
    this.body.className = "inspector-body";
    container.appendChild(this.body);
    this.render(null);
  }

  render(symbol: SymbolDoc | null): void {
    this.body.textContent = "";
    if (!symbol) {
      const hint = document.createElement("p");
      hint.className = "hint";
      hint.textContent = "Nothing selected.";
      this.body.appendChild(hint);
      return;
    }
    const kindLine = document.createElement("p");
    kindLine.className = "hint";
    kindLine.textContent = symbol.kind;
    this.body.appendChild(kindLine);
    for (const field of FIELDS[symbol.kind] ?? ["name"]) {
      const row = document.createElement("label");
      row.className = "field-row";
      const caption = document.createElement("span");
      caption.textContent = field;
      row.appendChild(caption);
      const input = document.createElement("input");
      input.value = field === "name" ? symbol.label : "";
      input.placeholder = field;
      input.addEventListener("change", () => {
        this.emit(fieldEdit(symbol.node, field, input.value));
      });
      row.appendChild(input);
      this.body.appendChild(row);
    }
  }
}
