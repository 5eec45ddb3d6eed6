// Composition root: project picker, session wiring, and the strict
// no-optimism render loop — every frame is drawn from the mirror, and the
// mirror only ever changes when the server says so.

import { CanvasPane } from "./canvas.js";
import { WorkbenchClient } from "./client.js";
import { deleteCommand, groupCommand } from "./gestures.js";
import { Inspector } from "./inspector.js";
import { CodePane, LayerFilterPanel, WizardDialog } from "./panels.js";
import { Toolbar } from "./toolbar.js";
import type { PaletteEntryDoc, RawEventDoc, SymbolDoc } from "./protocol.js";

interface AppElements {
  toolbar: HTMLElement;
  canvas: HTMLElement;
  inspector: HTMLElement;
  panels: HTMLElement;
  code: HTMLElement;
  status: HTMLElement;
  projects: HTMLSelectElement;
  undoButton: HTMLButtonElement;
  redoButton: HTMLButtonElement;
  saveButton: HTMLButtonElement;
  exportButton: HTMLButtonElement;
}

export class App {
  private client: WorkbenchClient | null = null;
  private palette: PaletteEntryDoc[] = [];
  private selection = new Set<string>();
  private canvas: CanvasPane;
  private toolbar: Toolbar;
  private inspector: Inspector;
  private layerPanel: LayerFilterPanel;
  private wizard: WizardDialog;
  private codePane: CodePane;

  constructor(private elements: AppElements) {
    this.canvas = new CanvasPane(elements.canvas, (event) => this.emitRaw(event));
    this.toolbar = new Toolbar(elements.toolbar, this.canvas, (event) => this.emitRaw(event));
    this.inspector = new Inspector(elements.inspector, (event) => this.emitRaw(event));
    this.layerPanel = new LayerFilterPanel(
      elements.panels,
      (event) => this.emitRaw(event),
      () => [...new Set(this.palette.map((entry) => entry.kind))].sort(),
    );
    this.wizard = new WizardDialog(document.body, (wizardId, answers) => {
      this.client?.sendWizardAnswers(wizardId, answers);
    });
    this.codePane = new CodePane(elements.code);

    elements.undoButton.addEventListener("click", () => this.client?.undo());
    elements.redoButton.addEventListener("click", () => this.client?.redo());
    elements.saveButton.addEventListener("click", () => this.client?.save());
    elements.exportButton.addEventListener("click", () => this.client?.exportCode());
    document.addEventListener("keydown", (event) => {
      if (event.key === "Delete" && this.selection.size) {
        this.emitRaw(deleteCommand([...this.selection][0]));
      }
      if (event.key === "g" && event.ctrlKey && this.selection.size) {
        event.preventDefault();
        this.emitRaw(groupCommand([...this.selection]));
      }
    });
    elements.projects.addEventListener("change", () => {
      this.openProject(elements.projects.value);
    });
  }

  async start(): Promise<void> {
    const response = await fetch("/api/projects");
    const doc = (await response.json()) as { projects: { id: string; name: string }[] };
    this.elements.projects.textContent = "";
    for (const project of doc.projects) {
      const option = document.createElement("option");
      option.value = project.id;
      option.textContent = project.name;
      this.elements.projects.appendChild(option);
    }
    if (doc.projects.length) {
      this.openProject(doc.projects[0].id);
    } else {
      this.elements.status.textContent = "no projects; create one with the CLI";
    }
  }

  private openProject(projectId: string): void {
    this.client?.close();
    this.selection.clear();
    const scheme = location.protocol === "https:" ? "wss" : "ws";
    this.client = new WorkbenchClient(
      `${scheme}://${location.host}/ws`,
      projectId,
      {
        onStatus: (status) => {
          this.elements.status.textContent = status;
          this.elements.status.className = `status ${status}`;
        },
        onSnapshot: (body) => {
          this.palette = body.palette;
          this.toolbar.render(this.palette);
          this.redraw();
        },
        onApplied: () => this.redraw(),
        onRejected: (diagnostics) => {
          this.elements.status.textContent =
            "rejected: " + diagnostics.map((d) => d.message).join("; ");
        },
        onNoop: () => undefined,
        onNeedsWizard: (wizardId, spec) => this.wizard.show(wizardId, spec),
        onCode: (artifacts) => this.codePane.render(artifacts),
        onError: (code, message) => {
          if (code === "cannot-generate") {
            this.codePane.renderError(`${code}: ${message}`);
          }
          this.elements.status.textContent = `${code}: ${message}`;
        },
        onMirrorMismatch: (expected, actual) => {
          console.error("mirror hash mismatch", { expected, actual });
          this.elements.status.textContent = "mirror out of sync; reconnecting";
          this.client?.close();
          this.client?.connect();
        },
      },
      (url) => new WebSocket(url) as unknown as import("./client.js").SocketLike,
    );
    this.client.connect();
  }

  private emitRaw(event: RawEventDoc): void {
    // selection is mirrored locally only to drive the inspector; the model
    // truth always comes back via applied patches
    if (event.kind === "Click" && event.payload.target) {
      if (event.payload.additive === "true") {
        this.selection.add(event.payload.target);
      } else {
        this.selection = new Set([event.payload.target]);
      }
    } else if (event.kind === "Click" && !("filter" in event.payload) && !("toggle_submodel" in event.payload)) {
      this.selection.clear();
    }
    this.client?.sendRawEvent(event);
    this.redraw();
  }

  private redraw(): void {
    if (!this.client) {
      return;
    }
    for (const id of [...this.selection]) {
      if (!this.client.mirror.symbols.has(id)) {
        this.selection.delete(id);
      }
    }
    this.canvas.render(this.client.mirror, this.selection);
    this.layerPanel.render(this.client.mirror);
    const primary: SymbolDoc | null = this.selection.size
      ? this.client.mirror.symbols.get([...this.selection][0]) ?? null
      : null;
    this.inspector.render(primary);
  }
}

export function mount(): void {
  const byId = <T extends HTMLElement>(id: string): T => {
    const element = document.getElementById(id);
    if (!element) {
      throw new Error(`missing element #${id}`);
    }
    return element as T;
  };
  const app = new App({
    toolbar: byId("toolbar"),
    canvas: byId("canvas"),
    inspector: byId("inspector"),
    panels: byId("panels"),
    code: byId("code"),
    status: byId("status"),
    projects: byId<HTMLSelectElement>("projects"),
    undoButton: byId<HTMLButtonElement>("undo"),
    redoButton: byId<HTMLButtonElement>("redo"),
    saveButton: byId<HTMLButtonElement>("save"),
    exportButton: byId<HTMLButtonElement>("export"),
  });
  void app.start();
}

if (typeof document !== "undefined" && document.getElementById("canvas")) {
  mount();
}
