import { ApiClient, ApiError } from "./api.js";
import { decodeMaskPng, paintOverlay, type MaskDecoder } from "./overlay.js";
import { SEGMENT_INSTRUCTION, SessionStore, type UiState } from "./store.js";
import type { MaskBitmap } from "./types.js";

interface Elements {
  imageInput: HTMLInputElement;
  imageCanvas: HTMLCanvasElement;
  overlayCanvas: HTMLCanvasElement;
  overlayToggle: HTMLInputElement;
  overlayOpacity: HTMLInputElement;
  targetLabel: HTMLElement;
  chatLog: HTMLElement;
  turnForm: HTMLFormElement;
  turnInput: HTMLInputElement;
  sendBtn: HTMLButtonElement;
  segmentBtn: HTMLButtonElement;
  errorBanner: HTMLElement;
  errorText: HTMLElement;
  retryBtn: HTMLButtonElement;
}

function grab(root: Document): Elements {
  const byId = <T extends HTMLElement>(id: string) => {
    const el = root.getElementById(id);
    if (!el) throw new Error(`missing element #${id}`);
    return el as T;
  };
  return {
    imageInput: byId<HTMLInputElement>("image-input"),
    imageCanvas: byId<HTMLCanvasElement>("image-canvas"),
    overlayCanvas: byId<HTMLCanvasElement>("overlay-canvas"),
    overlayToggle: byId<HTMLInputElement>("overlay-toggle"),
    overlayOpacity: byId<HTMLInputElement>("overlay-opacity"),
    targetLabel: byId("target-label"),
    chatLog: byId("chat-log"),
    turnForm: byId<HTMLFormElement>("turn-form"),
    turnInput: byId<HTMLInputElement>("turn-input"),
    sendBtn: byId<HTMLButtonElement>("send-btn"),
    segmentBtn: byId<HTMLButtonElement>("segment-btn"),
    errorBanner: byId("error-banner"),
    errorText: byId("error-text"),
    retryBtn: byId<HTMLButtonElement>("retry-btn"),
  };
}

export class App {
  readonly store = new SessionStore();
  private el: Elements;
  private maskCache = new Map<number, MaskBitmap>();
  private lastFailedText: string | null = null;

  constructor(
    private root: Document,
    private api: ApiClient,
    private decodeMask: MaskDecoder = decodeMaskPng,
  ) {
    this.el = grab(root);
  }

  async init(): Promise<void> {
    this.el.imageInput.addEventListener("change", () => void this.onUpload());
    this.el.turnForm.addEventListener("submit", (ev) => {
      ev.preventDefault();
      const text = this.el.turnInput.value.trim();
      if (text) void this.sendTurn(text);
    });
    this.el.segmentBtn.addEventListener("click", () => void this.sendTurn(SEGMENT_INSTRUCTION));
    this.el.overlayToggle.addEventListener("change", () =>
      this.store.setOverlayVisible(this.el.overlayToggle.checked),
    );
    this.el.overlayOpacity.addEventListener("input", () =>
      this.store.setOverlayOpacity(Number(this.el.overlayOpacity.value) / 100),
    );
    this.el.retryBtn.addEventListener("click", () => {
      this.store.clearError();
      if (this.lastFailedText) void this.sendTurn(this.lastFailedText);
    });
    this.store.subscribe((state) => this.render(state));
    this.render(this.store.get());

    const fromHash = this.root.location?.hash?.replace(/^#/, "");
    if (fromHash) await this.restore(fromHash);
  }

  /** Rebuild everything from the server after a hard refresh. */
  private async restore(sessionId: string): Promise<void> {
    try {
      const snapshot = await this.api.getSession(sessionId);
      this.store.syncFromServer(snapshot);
      const dataUrl = this.root.defaultView?.sessionStorage?.getItem(`chatseg-image-${sessionId}`);
      if (dataUrl) this.drawBaseImage(dataUrl);
      await this.refreshOverlay();
    } catch (err) {
      this.store.fail(err instanceof Error ? err.message : String(err));
    }
  }

  private async onUpload(): Promise<void> {
    const file = this.el.imageInput.files?.[0];
    if (!file) return;
    try {
      const sessionId = await this.api.createSession(file);
      this.store.startSession(sessionId);
      this.maskCache.clear();
      if (this.root.location) this.root.location.hash = sessionId;
      const dataUrl = await readAsDataUrl(file);
      // kept per tab so a hard refresh can re-show the image without new API surface
      this.root.defaultView?.sessionStorage?.setItem(`chatseg-image-${sessionId}`, dataUrl);
      this.drawBaseImage(dataUrl);
    } catch (err) {
      this.store.fail(err instanceof ApiError ? err.message : `upload failed: ${err}`);
    }
  }

  async sendTurn(text: string): Promise<void> {
    const state = this.store.get();
    if (!state.sessionId || state.busy) return;
    this.store.beginTurn(text);
    try {
      const result = await this.api.postTurn(state.sessionId, text);
      if (result.seg_triggered && result.mask_base64) {
        this.maskCache.set(result.turn_index, await this.decodeMask(result.mask_base64));
      }
      const snapshot = await this.api.getSession(state.sessionId);
      this.store.syncFromServer(snapshot);
      await this.refreshOverlay();
      this.el.turnInput.value = "";
      this.lastFailedText = null;
    } catch (err) {
      this.lastFailedText = text;
      this.store.failTurn(err instanceof Error ? err.message : String(err));
    }
  }

  /** Make sure the most recent mask (if any) is decoded and painted. */
  private async refreshOverlay(): Promise<void> {
    const state = this.store.get();
    const turn = state.overlay.maskTurn;
    if (turn === null) {
      this.clearOverlay();
      return;
    }
    if (!this.maskCache.has(turn)) {
      const result = state.results.find((r) => r.turn_index === turn);
      if (!result?.mask_url) return;
      try {
        const blob = await this.api.fetchMaskPng(result.mask_url);
        this.maskCache.set(turn, await this.decodeMask(blob));
      } catch (err) {
        this.store.fail(err instanceof Error ? err.message : String(err));
        return;
      }
    }
    const mask = this.maskCache.get(turn);
    if (mask) paintOverlay(this.el.overlayCanvas, mask, state.overlay.color);
    this.render(this.store.get());
  }

  private clearOverlay(): void {
    const ctx = this.el.overlayCanvas.getContext("2d");
    ctx?.clearRect(0, 0, this.el.overlayCanvas.width, this.el.overlayCanvas.height);
  }

  private drawBaseImage(dataUrl: string): void {
    const img = new Image();
    img.onload = () => {
      this.el.imageCanvas.width = img.naturalWidth;
      this.el.imageCanvas.height = img.naturalHeight;
      this.el.imageCanvas.getContext("2d")?.drawImage(img, 0, 0);
    };
    img.src = dataUrl;
  }

  private render(state: UiState): void {
    const log = this.el.chatLog;
    log.textContent = "";
    for (const turn of this.store.visibleTurns()) {
      const bubble = this.root.createElement("div");
      bubble.className = `bubble ${turn.role}`;
      bubble.textContent = turn.text;
      log.appendChild(bubble);
    }
    if (state.busy) {
      const thinking = this.root.createElement("div");
      thinking.className = "bubble assistant thinking";
      thinking.textContent = "...";
      log.appendChild(thinking);
    }
    log.scrollTop = log.scrollHeight;

    const hasSession = state.sessionId !== null;
    this.el.turnInput.disabled = !hasSession || state.busy;
    this.el.sendBtn.disabled = !hasSession || state.busy;
    this.el.segmentBtn.disabled = !hasSession || state.busy;

    const showMask = state.overlay.visible && state.overlay.maskTurn !== null;
    this.el.overlayCanvas.style.display = showMask ? "block" : "none";
    this.el.overlayCanvas.style.opacity = String(state.overlay.opacity);
    this.el.overlayToggle.checked = state.overlay.visible;

    const lastSeg = [...state.results].reverse().find((r) => r.seg_triggered);
    this.el.targetLabel.textContent = lastSeg?.target_class ? `target: ${lastSeg.target_class}` : "";

    this.el.errorBanner.hidden = state.error === null;
    this.el.errorText.textContent = state.error ?? "";
  }
}

function readAsDataUrl(file: Blob): Promise<string> {
  return new Promise((resolve, reject) => {
    const reader = new FileReader();
    reader.onload = () => resolve(String(reader.result));
    reader.onerror = () => reject(reader.error);
    reader.readAsDataURL(file);
  });
}
