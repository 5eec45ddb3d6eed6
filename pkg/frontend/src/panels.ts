// Side panels: layer/filter toggles (classified server-side as filter
// events), the wizard dialog, and the code preview drawer.

import { filterToggle } from "./gestures.js";
import { collectAnswers, initialFieldState } from "./wizard.js";
import type {
  ArtifactDoc,
  RawEventDoc,
  ScalarValue,
  WizardSpecDoc,
} from "./protocol.js";
import type { SceneMirror } from "./mirror.js";

export class LayerFilterPanel {
  private body: HTMLElement;

  constructor(
    container: HTMLElement,
    private emit: (event: RawEventDoc) => void,
    private symbolKinds: () => string[],
  ) {
    const heading = document.createElement("h2");
    heading.textContent = "Layers & filters";
    container.appendChild(heading);
    this.body = document.createElement("div");
    container.appendChild(this.body);
  }

  render(mirror: SceneMirror): void {
    this.body.textContent = "";
    for (const layer of [...mirror.layers.values()].sort((a, b) => (a.id < b.id ? -1 : 1))) {
      const filterId = `layer:${layer.id}`;
      const active = mirror.filters.get(filterId)?.active ?? false;
      this.body.appendChild(
        this.toggleRow(`layer ${layer.name}`, !active, () =>
          this.emit(filterToggle(filterId, "by-layer", layer.id, !active)),
        ),
      );
    }
    for (const kind of this.symbolKinds()) {
      const filterId = `kind:${kind}`;
      const active = mirror.filters.get(filterId)?.active ?? false;
      this.body.appendChild(
        this.toggleRow(`show ${kind}`, !active, () =>
          this.emit(filterToggle(filterId, "by-kind", kind, !active)),
        ),
      );
    }
  }

  private toggleRow(label: string, checked: boolean, onToggle: () => void): HTMLElement {
    const row = document.createElement("label");
    row.className = "field-row";
    const box = document.createElement("input");
    box.type = "checkbox";
    box.checked = checked;
    box.addEventListener("change", onToggle);
    row.appendChild(box);
    const caption = document.createElement("span");
    caption.textContent = label;
    row.appendChild(caption);
    return row;
  }
}

export class WizardDialog {
  private overlay: HTMLElement;

  constructor(
    container: HTMLElement,
    private submit: (wizardId: string, answers: Record<string, ScalarValue>) => void,
  ) {
    this.overlay = document.createElement("div");
    this.overlay.className = "wizard-overlay hidden";
    container.appendChild(this.overlay);
  }

  show(wizardId: string, spec: WizardSpecDoc): void {
    this.overlay.textContent = "";
    this.overlay.classList.remove("hidden");
    const dialog = document.createElement("form");
    dialog.className = "wizard-dialog";
    const heading = document.createElement("h2");
    heading.textContent = spec.id;
    dialog.appendChild(heading);
    const inputs = new Map<string, HTMLInputElement>();
    for (const field of spec.fields) {
      const state = initialFieldState(field);
      const row = document.createElement("label");
      row.className = "field-row";
      const caption = document.createElement("span");
      caption.textContent = field.required ? `${field.name} *` : field.name;
      row.appendChild(caption);
      const input = document.createElement("input");
      input.value = state.raw;
      input.name = field.name;
      row.appendChild(input);
      inputs.set(field.name, input);
      dialog.appendChild(row);
    }
    const error = document.createElement("p");
    error.className = "wizard-error";
    dialog.appendChild(error);
    const actions = document.createElement("div");
    actions.className = "wizard-actions";
    const cancel = document.createElement("button");
    cancel.type = "button";
    cancel.textContent = "Cancel";
    cancel.addEventListener("click", () => this.hide());
    const ok = document.createElement("button");
    ok.type = "submit";
    ok.textContent = "Create";
    actions.append(cancel, ok);
    dialog.appendChild(actions);
    dialog.addEventListener("submit", (event) => {
      event.preventDefault();
      const raw = new Map<string, string>();
      for (const [name, input] of inputs) {
        raw.set(name, input.value);
      }
      try {
        const answers = collectAnswers(spec, raw);
        this.hide();
        this.submit(wizardId, answers);
      } catch (exc) {
        error.textContent = String(exc instanceof Error ? exc.message : exc);
      }
    });
    this.overlay.appendChild(dialog);
  }

  hide(): void {
    this.overlay.classList.add("hidden");
    this.overlay.textContent = "";
  }
}

export class CodePane {
  private body: HTMLElement;

  constructor(container: HTMLElement) {
    const heading = document.createElement("h2");
    heading.textContent = "Generated code";
    container.appendChild(heading);
    this.body = document.createElement("div");
    this.body.className = "code-body";
    container.appendChild(this.body);
  }

  render(artifacts: ArtifactDoc[]): void {
    this.body.textContent = "";
    for (const artifact of artifacts) {
      const caption = document.createElement("h3");
      caption.textContent = artifact.path;
      this.body.appendChild(caption);
      const pre = document.createElement("pre");
      pre.textContent = artifact.content;
      this.body.appendChild(pre);
    }
  }

  renderError(message: string): void {
    this.body.textContent = "";
    const p = document.createElement("p");
    p.className = "wizard-error";
    p.textContent = message;
    this.body.appendChild(p);
  }
}
