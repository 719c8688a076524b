import type { OverlayState, SessionSnapshot, Turn, TurnResult } from "./types.js";

/** Final instruction the quick-action sends; must match the service corpus. */
export const SEGMENT_INSTRUCTION = "Please segment the core objects according to the above dialogue";

export interface UiState {
  sessionId: string | null;
  turns: Turn[];
  results: TurnResult[];
  pendingUserText: string | null;
  busy: boolean;
  error: string | null;
  overlay: OverlayState;
}

type Listener = (state: UiState) => void;

/**
 * Single source of truth for the page. The turn list is always the server's
 * history verbatim; an in-flight user message is tracked separately and
 * never merged into it client-side.
 */
export class SessionStore {
  private state: UiState = SessionStore.initial();
  private listeners: Listener[] = [];

  static initial(): UiState {
    return {
      sessionId: null,
      turns: [],
      results: [],
      pendingUserText: null,
      busy: false,
      error: null,
      overlay: { visible: true, opacity: 0.45, color: [236, 72, 153], maskTurn: null },
    };
  }

  get(): UiState {
    return this.state;
  }

  subscribe(listener: Listener): () => void {
    this.listeners.push(listener);
    return () => {
      this.listeners = this.listeners.filter((l) => l !== listener);
    };
  }

  private set(patch: Partial<UiState>) {
    this.state = { ...this.state, ...patch };
    for (const listener of this.listeners) listener(this.state);
  }

  startSession(sessionId: string) {
    this.set({ ...SessionStore.initial(), sessionId });
  }

  beginTurn(text: string) {
    this.set({ pendingUserText: text, busy: true, error: null });
  }

  /** Replace local state with the server's snapshot (the only turn source). */
  syncFromServer(snapshot: SessionSnapshot) {
    const lastMask = [...snapshot.results].reverse().find((r) => r.seg_triggered && r.mask_url);
    this.set({
      sessionId: snapshot.session_id,
      turns: snapshot.turns.slice(),
      results: snapshot.results.slice(),
      pendingUserText: null,
      busy: false,
      overlay: { ...this.state.overlay, maskTurn: lastMask ? lastMask.turn_index : null },
    });
  }

  failTurn(message: string) {
    this.set({ pendingUserText: null, busy: false, error: message });
  }

  fail(message: string) {
    this.set({ busy: false, error: message });
  }

  clearError() {
    this.set({ error: null });
  }

  setOverlayVisible(visible: boolean) {
    this.set({ overlay: { ...this.state.overlay, visible } });
  }

  setOverlayOpacity(opacity: number) {
    this.set({ overlay: { ...this.state.overlay, opacity: Math.min(1, Math.max(0, opacity)) } });
  }

  /** Bubbles to render: server history plus the optimistic in-flight text. */
  visibleTurns(): Turn[] {
    const turns = this.state.turns.slice();
    if (this.state.pendingUserText !== null) {
      turns.push({ role: "user", text: this.state.pendingUserText });
    }
    return turns;
  }
}
