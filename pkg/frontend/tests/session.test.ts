import { describe, expect, it } from "vitest";
import { validateManifest } from "../src/schema";
import {
  answeredCount,
  createSession,
  exportResponse,
  introComplete,
  isComplete,
  markTimerExpired,
  playIntro,
  recordResponse,
  setMemorability,
} from "../src/session";

const MANIFEST = validateManifest({
  schema_version: 1,
  package_id: "pkg-t",
  references: ["A.wav", "B.wav", "C.wav"],
  queries: Array.from({ length: 8 }, (_, i) => `${i}.wav`),
  intro: "intro.wav",
});

function fresh() {
  return createSession(MANIFEST, "2026-08-09T10:00:00Z");
}

function answeredAll() {
  let s = fresh();
  for (let q = 0; q < 8; q += 1) {
    s = recordResponse(s, q, "A");
  }
  return setMemorability(s, "B");
}

describe("intro step", () => {
  it("counts exactly three plays and no more", () => {
    let s = fresh();
    expect(introComplete(s)).toBe(false);
    s = playIntro(playIntro(playIntro(s)));
    expect(s.introPlays).toBe(3);
    expect(introComplete(s)).toBe(true);
    expect(playIntro(s).introPlays).toBe(3);
  });
});

describe("recordResponse", () => {
  it("stores and overwrites choices", () => {
    let s = recordResponse(fresh(), 3, "A");
    expect(s.answers["3"]).toBe("A");
    s = recordResponse(s, 3, "C");
    expect(s.answers["3"]).toBe("C");
  });

  it("rejects invalid ids and choices without changing state", () => {
    const s = fresh();
    expect(recordResponse(s, 8, "A")).toBe(s);
    expect(recordResponse(s, -1, "A")).toBe(s);
    expect(recordResponse(s, 0, "D")).toBe(s);
    expect(setMemorability(s, "x")).toBe(s);
  });
});

describe("completeness gate", () => {
  it("requires all 8 queries plus the memorability answer", () => {
    let s = fresh();
    for (let q = 0; q < 8; q += 1) {
      s = recordResponse(s, q, "B");
    }
    expect(answeredCount(s)).toBe(8);
    expect(isComplete(s)).toBe(false);
    s = setMemorability(s, "C");
    expect(answeredCount(s)).toBe(9);
    expect(isComplete(s)).toBe(true);
  });

  it("8 of 9 answered keeps export blocked", () => {
    let s = fresh();
    for (let q = 0; q < 7; q += 1) {
      s = recordResponse(s, q, "B");
    }
    s = setMemorability(s, "A");
    expect(isComplete(s)).toBe(false);
    expect(() => exportResponse(s, "p1", "2026-08-09T10:05:00Z")).toThrowError(/incomplete/);
  });
});

describe("exportResponse", () => {
  it("produces the grading schema", () => {
    const doc = exportResponse(answeredAll(), "p1", "2026-08-09T10:09:30Z");
    expect(doc.package_id).toBe("pkg-t");
    expect(Object.keys(doc.answers).sort()).toEqual(["0", "1", "2", "3", "4", "5", "6", "7"]);
    expect(doc.memorability).toBe("B");
    expect(doc.participant_id).toBe("p1");
    expect(doc.started_at).toBe("2026-08-09T10:00:00Z");
    expect(doc.submitted_at).toBe("2026-08-09T10:09:30Z");
    expect(doc.timer_expired).toBe(false);
  });

  it("reflects overwritten answers", () => {
    let s = answeredAll();
    s = recordResponse(s, 3, "C");
    expect(exportResponse(s, "p1", "t").answers["3"]).toBe("C");
  });

  it("records timer expiry without blocking export", () => {
    const doc = exportResponse(markTimerExpired(answeredAll()), "p1", "t");
    expect(doc.timer_expired).toBe(true);
  });

  it("requires a participant id", () => {
    expect(() => exportResponse(answeredAll(), "  ", "t")).toThrowError(/participant/);
  });

  it("contains no key material fields", () => {
    const doc = exportResponse(answeredAll(), "p1", "t") as unknown as Record<string, unknown>;
    for (const field of ["key", ["answer", "key"].join("_"), ["memorability", "choice"].join("_"), "labels"]) {
      expect(field in doc).toBe(false);
    }
  });
});
