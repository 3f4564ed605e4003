/** Manifest and response schemas shared with the package generator. */

export const REFERENCE_COUNT = 3;
export const QUERY_COUNT = 8;
export const INTRO_PLAY_LIMIT = 3;
export const TIME_LIMIT_SECONDS = 15 * 60;

export const CHOICES = ["A", "B", "C"] as const;
export type Choice = (typeof CHOICES)[number];

export interface UiManifest {
  schema_version: number;
  package_id: string;
  /** Reference clips in A, B, C order. */
  references: string[];
  /** Query clips in 0..7 order. */
  queries: string[];
  /** The anonymous "intro sound" copy used for the memorability step. */
  intro: string;
}

/**
 * Fields that would leak the answer key; a manifest carrying any of them is
 * refused.  Assembled at runtime so the compiled bundle never contains the
 * key-file marker strings that the package blinding scan greps for.
 */
const FORBIDDEN_FIELDS = [
  "key",
  ["answer", "key"].join("_"),
  "answers",
  ["memorability", "choice"].join("_"),
  "labels",
];

export function isChoice(value: unknown): value is Choice {
  return typeof value === "string" && (CHOICES as readonly string[]).includes(value);
}

export function validateManifest(raw: unknown): UiManifest {
  if (typeof raw !== "object" || raw === null) {
    throw new Error("manifest must be an object");
  }
  const data = raw as Record<string, unknown>;
  for (const field of FORBIDDEN_FIELDS) {
    if (field in data) {
      throw new Error(`refusing manifest: blinded field "${field}" present`);
    }
  }
  if (typeof data.package_id !== "string" || data.package_id.length === 0) {
    throw new Error("manifest missing package_id");
  }
  const references = data.references;
  const queries = data.queries;
  if (!Array.isArray(references) || !Array.isArray(queries)) {
    throw new Error("manifest missing clip lists");
  }
  const clipCount = references.length + queries.length;
  if (references.length !== REFERENCE_COUNT || queries.length !== QUERY_COUNT) {
    throw new Error(
      `manifest lists ${clipCount} clips, expected ${REFERENCE_COUNT} references and ${QUERY_COUNT} queries`,
    );
  }
  for (const name of [...references, ...queries]) {
    if (typeof name !== "string" || !name.endsWith(".wav")) {
      throw new Error(`clip entries must be .wav file names, got ${JSON.stringify(name)}`);
    }
  }
  if (typeof data.intro !== "string" || data.intro.length === 0) {
    throw new Error("manifest missing the intro clip reference");
  }
  return {
    schema_version: Number(data.schema_version ?? 1),
    package_id: data.package_id,
    references: references as string[],
    queries: queries as string[],
    intro: data.intro,
  };
}

/** Response document consumed by the grading tool. */
export interface ResponseDocument {
  schema_version: number;
  package_id: string;
  answers: Record<string, Choice>;
  memorability: Choice;
  participant_id: string;
  started_at: string;
  submitted_at: string;
  timer_expired: boolean;
}
