// The protocol client: one WebSocket per session, contiguous sequence
// numbers in both directions, strictly in-order dispatch. The mirror is the
// only state it owns; on reconnect the mirror is discarded and rebuilt from
// the fresh snapshot, never patched across a gap.

import { SceneMirror } from "./mirror.js";
import type {
  AppliedBody,
  ArtifactDoc,
  DiagnosticDoc,
  Envelope,
  RawEventDoc,
  SnapshotBody,
  WizardSpecDoc,
} from "./protocol.js";

export interface SocketLike {
  send(text: string): void;
  close(): void;
  onmessage: ((event: { data: string }) => void) | null;
  onopen: (() => void) | null;
  onclose: (() => void) | null;
}

export type SocketFactory = (url: string) => SocketLike;

export interface ClientHandlers {
  onSnapshot?(body: SnapshotBody): void;
  onApplied?(body: AppliedBody): void;
  onRejected?(diagnostics: DiagnosticDoc[]): void;
  onNoop?(body: Record<string, unknown>): void;
  onNeedsWizard?(wizardId: string, spec: WizardSpecDoc): void;
  onCode?(artifacts: ArtifactDoc[]): void;
  onError?(code: string, message: string): void;
  onStatus?(status: "connecting" | "open" | "closed"): void;
  onMirrorMismatch?(expected: string, actual: string): void;
}

export class WorkbenchClient {
  readonly mirror = new SceneMirror();
  private socket: SocketLike | null = null;
  private clientSeq = 0;
  private serverSeq = 0;
  private sessionId: string | null = null;
  private snapshot: SnapshotBody | null = null;

  constructor(
    private readonly url: string,
    private readonly project: string,
    private readonly handlers: ClientHandlers,
    private readonly socketFactory: SocketFactory,
    private readonly verifyHashes = true,
  ) {}

  connect(): void {
    this.handlers.onStatus?.("connecting");
    this.clientSeq = 0;
    this.serverSeq = 0;
    this.sessionId = null;
    const socket = this.socketFactory(this.url);
    this.socket = socket;
    socket.onopen = () => {
      this.send("open_session", { project: this.project });
    };
    socket.onmessage = (event) => this.receive(event.data);
    socket.onclose = () => {
      this.handlers.onStatus?.("closed");
      this.socket = null;
    };
  }

  close(): void {
    this.socket?.close();
    this.socket = null;
  }

  get session(): string | null {
    return this.sessionId;
  }

  get lastSnapshot(): SnapshotBody | null {
    return this.snapshot;
  }

  send(type: string, body: Record<string, unknown>): void {
    if (!this.socket) {
      throw new Error("not connected");
    }
    this.clientSeq += 1;
    const envelope: Envelope = {
      type,
      session: this.sessionId,
      seq: this.clientSeq,
      body,
    };
    this.socket.send(JSON.stringify(envelope));
  }

  sendRawEvent(event: RawEventDoc): void {
    this.send("raw_event", { event });
  }

  sendWizardAnswers(wizardId: string, answers: Record<string, unknown>): void {
    this.send("wizard_answers", { wizard_id: wizardId, answers });
  }

  undo(): void {
    this.send("undo", {});
  }

  redo(): void {
    this.send("redo", {});
  }

  save(): void {
    this.send("save", {});
  }

  exportCode(): void {
    this.send("export_code", {});
  }

  private receive(text: string): void {
    const message = JSON.parse(text) as Envelope;
    if (message.seq !== this.serverSeq + 1) {
      // a gapped stream cannot be patched; drop the mirror and start over
      this.handlers.onError?.("sequence-gap", `server seq ${message.seq}, expected ${this.serverSeq + 1}`);
      this.close();
      return;
    }
    this.serverSeq = message.seq;
    switch (message.type) {
      case "snapshot": {
        const body = message.body as unknown as SnapshotBody;
        this.sessionId = body.session;
        this.snapshot = body;
        this.mirror.loadSnapshot(body.scene);
        this.checkHash(body.scene_hash);
        this.handlers.onStatus?.("open");
        this.handlers.onSnapshot?.(body);
        break;
      }
      case "applied": {
        const body = message.body as unknown as AppliedBody;
        this.mirror.applyPatch(body.view_patch);
        this.checkHash(body.scene_hash);
        this.handlers.onApplied?.(body);
        break;
      }
      case "rejected":
        this.handlers.onRejected?.(
          (message.body as { diagnostics?: DiagnosticDoc[] }).diagnostics ?? [],
        );
        break;
      case "noop":
        this.handlers.onNoop?.(message.body as Record<string, unknown>);
        break;
      case "needs_wizard": {
        const body = message.body as { wizard_id: string; spec: WizardSpecDoc };
        this.handlers.onNeedsWizard?.(body.wizard_id, body.spec);
        break;
      }
      case "code":
        this.handlers.onCode?.((message.body as { artifacts: ArtifactDoc[] }).artifacts);
        break;
      case "error": {
        const body = message.body as { code?: string; message?: string };
        this.handlers.onError?.(body.code ?? "error", body.message ?? "");
        break;
      }
      default:
        this.handlers.onError?.("unknown-message", message.type);
    }
  }

  private checkHash(expected: string): void {
    if (!this.verifyHashes) {
      return;
    }
    const actual = this.mirror.hash();
    if (actual !== expected) {
      this.handlers.onMirrorMismatch?.(expected, actual);
    }
  }
}
