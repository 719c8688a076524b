import type { SessionSnapshot, TurnResult } from "./types.js";

export class ApiError extends Error {
  constructor(readonly status: number, detail: string) {
    super(detail);
  }
}

async function reject(resp: Response): Promise<never> {
  let detail = `${resp.status} ${resp.statusText}`;
  try {
    const body = await resp.json();
    if (body && typeof body.detail === "string") detail = body.detail;
  } catch {
    /* body was not JSON */
  }
  throw new ApiError(resp.status, detail);
}

export class ApiClient {
  constructor(readonly baseUrl: string = "") {}

  async createSession(image: File | Blob): Promise<string> {
    const form = new FormData();
    form.append("image", image, "upload.png");
    const resp = await fetch(`${this.baseUrl}/sessions`, { method: "POST", body: form });
    if (!resp.ok) await reject(resp);
    const body = await resp.json();
    return body.session_id as string;
  }

  async postTurn(sessionId: string, text: string): Promise<TurnResult> {
    const resp = await fetch(`${this.baseUrl}/sessions/${sessionId}/turns`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ text }),
    });
    if (!resp.ok) await reject(resp);
    return (await resp.json()) as TurnResult;
  }

  async getSession(sessionId: string): Promise<SessionSnapshot> {
    const resp = await fetch(`${this.baseUrl}/sessions/${sessionId}`);
    if (!resp.ok) await reject(resp);
    return (await resp.json()) as SessionSnapshot;
  }

  maskUrl(relative: string): string {
    return `${this.baseUrl}${relative}`;
  }

  async fetchMaskPng(relative: string): Promise<Blob> {
    const resp = await fetch(this.maskUrl(relative));
    if (!resp.ok) await reject(resp);
    return await resp.blob();
  }
}
