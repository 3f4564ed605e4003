/** Pure test-session state machine; the DOM layer is a thin shell over this. */

import {
  Choice,
  INTRO_PLAY_LIMIT,
  QUERY_COUNT,
  ResponseDocument,
  UiManifest,
  isChoice,
} from "./schema";

export interface Session {
  manifest: UiManifest;
  introPlays: number;
  answers: Record<string, Choice>;
  memorability: Choice | null;
  startedAt: string;
  timerExpired: boolean;
}

export function createSession(manifest: UiManifest, startedAt: string): Session {
  return {
    manifest,
    introPlays: 0,
    answers: {},
    memorability: null,
    startedAt,
    timerExpired: false,
  };
}

/** Count one on-demand intro play; plays beyond the limit are rejected. */
export function playIntro(session: Session): Session {
  if (session.introPlays >= INTRO_PLAY_LIMIT) {
    return session;
  }
  return { ...session, introPlays: session.introPlays + 1 };
}

export function introComplete(session: Session): boolean {
  return session.introPlays >= INTRO_PLAY_LIMIT;
}

/** Store a query answer; re-choosing overwrites. Invalid input leaves the session unchanged. */
export function recordResponse(session: Session, queryId: number | string, choice: unknown): Session {
  const id = String(queryId);
  const valid = /^[0-9]+$/.test(id) && Number(id) >= 0 && Number(id) < QUERY_COUNT;
  if (!valid || !isChoice(choice)) {
    return session;
  }
  return { ...session, answers: { ...session.answers, [id]: choice } };
}

export function setMemorability(session: Session, choice: unknown): Session {
  if (!isChoice(choice)) {
    return session;
  }
  return { ...session, memorability: choice };
}

export function markTimerExpired(session: Session): Session {
  return { ...session, timerExpired: true };
}

export function answeredCount(session: Session): number {
  let n = Object.keys(session.answers).length;
  if (session.memorability !== null) {
    n += 1;
  }
  return n;
}

/** All eight queries plus the memorability question. */
export function isComplete(session: Session): boolean {
  for (let q = 0; q < QUERY_COUNT; q += 1) {
    if (!(String(q) in session.answers)) {
      return false;
    }
  }
  return session.memorability !== null;
}

export function exportResponse(
  session: Session,
  participantId: string,
  submittedAt: string,
): ResponseDocument {
  if (!participantId.trim()) {
    throw new Error("participant id is required");
  }
  if (!isComplete(session)) {
    throw new Error("session incomplete: answer all 8 queries and the intro-sound question");
  }
  const answers: Record<string, Choice> = {};
  for (let q = 0; q < QUERY_COUNT; q += 1) {
    answers[String(q)] = session.answers[String(q)];
  }
  return {
    schema_version: 1,
    package_id: session.manifest.package_id,
    answers,
    memorability: session.memorability as Choice,
    participant_id: participantId.trim(),
    started_at: session.startedAt,
    submitted_at: submittedAt,
    timer_expired: session.timerExpired,
  };
}
