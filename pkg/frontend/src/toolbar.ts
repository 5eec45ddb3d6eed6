// Palette toolbar: one draggable chip per palette entry. Dropping a chip on
// the canvas emits exactly one Drop raw event at the pointer position.

import { paletteDrop } from "./gestures.js";
import type { PaletteEntryDoc, RawEventDoc } from "./protocol.js";
import type { CanvasPane } from "./canvas.js";

export class Toolbar {
  private list: HTMLElement;

  constructor(
    container: HTMLElement,
    private canvas: CanvasPane,
    private emit: (event: RawEventDoc) => void,
  ) {
    const heading = document.createElement("h2");
    heading.textContent = "Palette";
    container.appendChild(heading);
    this.list = document.createElement("div");
    this.list.className = "palette";
    container.appendChild(this.list);

    this.canvas.root.addEventListener("dragover", (event) => event.preventDefault());
    this.canvas.root.addEventListener("drop", (event) => {
      event.preventDefault();
      const item = event.dataTransfer?.getData("text/palette-item");
      if (item) {
        const point = this.canvas.toCanvas(event);
        this.emit(paletteDrop(item, point.x, point.y));
      }
    });
  }

  render(entries: PaletteEntryDoc[]): void {
    this.list.textContent = "";
    for (const entry of entries) {
      const chip = document.createElement("div");
      chip.className = "palette-chip";
      chip.draggable = true;
      chip.textContent = entry.label;
      chip.title = entry.item;
      chip.addEventListener("dragstart", (event) => {
        event.dataTransfer?.setData("text/palette-item", entry.item);
      });
      this.list.appendChild(chip);
    }
  }
}
