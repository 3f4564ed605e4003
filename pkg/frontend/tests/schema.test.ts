import { describe, expect, it } from "vitest";
import { validateManifest } from "../src/schema";

const GOOD = {
  schema_version: 1,
  package_id: "pkg-abc123",
  references: ["A.wav", "B.wav", "C.wav"],
  queries: ["0.wav", "1.wav", "2.wav", "3.wav", "4.wav", "5.wav", "6.wav", "7.wav"],
  intro: "intro.wav",
};

describe("validateManifest", () => {
  it("accepts a well-formed manifest", () => {
    const m = validateManifest(GOOD);
    expect(m.package_id).toBe("pkg-abc123");
    expect(m.references).toHaveLength(3);
    expect(m.queries).toHaveLength(8);
  });

  it("rejects a manifest listing 12 clips", () => {
    const bad = { ...GOOD, queries: [...GOOD.queries, "8.wav"] };
    expect(() => validateManifest(bad)).toThrowError(/12 clips/);
  });

  it("rejects a manifest with too few references", () => {
    expect(() => validateManifest({ ...GOOD, references: ["A.wav"] })).toThrowError(/expected 3/);
  });

  it("refuses any manifest carrying a key field (blinding guard)", () => {
    expect(() => validateManifest({ ...GOOD, key: { "0": "A" } })).toThrowError(/blinded field "key"/);
    expect(() => validateManifest({ ...GOOD, answer_key: {} })).toThrowError(/blinded/);
    expect(() => validateManifest({ ...GOOD, memorability_choice: "A" })).toThrowError(/blinded/);
  });

  it("rejects missing intro or package id", () => {
    expect(() => validateManifest({ ...GOOD, intro: undefined })).toThrowError(/intro/);
    expect(() => validateManifest({ ...GOOD, package_id: "" })).toThrowError(/package_id/);
  });

  it("rejects non-wav clip entries", () => {
    const bad = { ...GOOD, references: ["A.wav", "B.mp3", "C.wav"] };
    expect(() => validateManifest(bad)).toThrowError(/wav/);
  });
});
