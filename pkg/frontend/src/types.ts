export interface Turn {
  role: "user" | "assistant";
  text: string;
}

export interface TurnResult {
  turn_index: number;
  assistant_text: string;
  seg_triggered: boolean;
  outcome: string;
  target_class: string | null;
  latency_ms: number;
  mask_url: string | null;
  mask_base64?: string;
}

export interface SessionSnapshot {
  session_id: string;
  created_at: number;
  turns: Turn[];
  results: TurnResult[];
}

export interface MaskBitmap {
  width: number;
  height: number;
  /** one byte per pixel, 255 = masked */
  data: Uint8ClampedArray;
}

export interface OverlayState {
  visible: boolean;
  opacity: number;
  color: [number, number, number];
  /** turn index the current mask belongs to, if any */
  maskTurn: number | null;
}
