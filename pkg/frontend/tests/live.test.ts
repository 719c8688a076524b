// @vitest-environment node
/**
 * Same scripted flow as app.test.ts but against a real running service.
 * Skipped unless CHATSEG_SERVICE_URL is set, e.g.:
 *
 *   chatseg serve --ckpt runs/s2 --port 8111 &
 *   CHATSEG_SERVICE_URL=http://127.0.0.1:8111 \
 *   CHATSEG_TEST_IMAGE=../data/tiny/images/img00000.png \
 *   CHATSEG_TEST_TURNS='["what stands out ?","which color is it ?","what outline does it have ?"]' \
 *   npm test -- tests/live.test.ts
 */

import { readFileSync } from "node:fs";

import { describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import { SEGMENT_INSTRUCTION } from "../src/store.js";

const BASE = process.env.CHATSEG_SERVICE_URL ?? "";

// 16x16 gray PNG for when no image path is provided
const FALLBACK_PNG =
  "iVBORw0KGgoAAAANSUhEUgAAABAAAAAQCAIAAACQkWg2AAAAFklEQVR4nGP8//8/A27AhEduVDq0SwMAx8sDPQByCXwAAAAASUVORK5CYII=";

function testImage(): Uint8Array {
  const path = process.env.CHATSEG_TEST_IMAGE;
  if (path) return new Uint8Array(readFileSync(path));
  return Uint8Array.from(atob(FALLBACK_PNG), (c) => c.charCodeAt(0));
}

function testTurns(): string[] {
  const raw = process.env.CHATSEG_TEST_TURNS;
  if (raw) return JSON.parse(raw) as string[];
  return ["what stands out here ?", "which part of the image holds it ?"];
}

describe.skipIf(!BASE)("live service flow", () => {
  it("uploads, chats, segments, and survives a transcript re-fetch", async () => {
    const api = new ApiClient(BASE);
    const image = testImage();
    const sessionId = await api.createSession(new Blob([image.buffer as ArrayBuffer], { type: "image/png" }));
    expect(sessionId.length).toBeGreaterThan(0);

    const turns = testTurns();
    for (const text of turns) {
      const result = await api.postTurn(sessionId, text);
      expect(typeof result.assistant_text).toBe("string");
    }
    const final = await api.postTurn(sessionId, SEGMENT_INSTRUCTION);
    expect(final.seg_triggered).toBe(true);
    expect(final.mask_url).toBeTruthy();
    const mask = await api.fetchMaskPng(final.mask_url!);
    expect(mask.size).toBeGreaterThan(0);
    expect(final.mask_base64 && final.mask_base64.length).toBeTruthy();

    // the "hard refresh" path: rebuild state purely from the server
    const snapshot = await api.getSession(sessionId);
    expect(snapshot.turns).toHaveLength(2 * (turns.length + 1));
    expect(snapshot.turns[snapshot.turns.length - 2].text).toBe(SEGMENT_INSTRUCTION);
    const segResults = snapshot.results.filter((r) => r.seg_triggered);
    expect(segResults.length).toBeGreaterThan(0);
    const again = await api.getSession(sessionId);
    expect(again.turns).toEqual(snapshot.turns);
  }, 120_000);
});
