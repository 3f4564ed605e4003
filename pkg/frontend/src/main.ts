/** DOM shell for the offline listening test: renders players, records choices,
 * and exports the response document.  All assets are local; the page never
 * touches the network. */

import {
  CHOICES,
  INTRO_PLAY_LIMIT,
  TIME_LIMIT_SECONDS,
  UiManifest,
  validateManifest,
} from "./schema";
import {
  Session,
  answeredCount,
  createSession,
  exportResponse,
  introComplete,
  isComplete,
  markTimerExpired,
  playIntro,
  recordResponse,
  setMemorability,
} from "./session";

declare global {
  interface Window {
    EARBALLS_MANIFEST?: unknown;
    EARBALLS_SESSION?: () => Session;
  }
}

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string> = {},
  text = "",
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [key, value] of Object.entries(attrs)) {
    node.setAttribute(key, value);
  }
  if (text) {
    node.textContent = text;
  }
  return node;
}

function showError(message: string): void {
  const banner = document.getElementById("error-banner") ?? el("div", { id: "error-banner" });
  banner.textContent = message;
  banner.setAttribute("class", "error");
  document.body.prepend(banner);
}

function audioPlayer(src: string, onMissing: (name: string) => void): HTMLAudioElement {
  const audio = el("audio", { src, controls: "controls", preload: "auto" });
  audio.addEventListener("error", () => onMissing(src));
  return audio;
}

function formatClock(seconds: number): string {
  const m = Math.floor(seconds / 60);
  const s = seconds % 60;
  return `${m}:${String(s).padStart(2, "0")}`;
}

export function boot(root: HTMLElement, manifestRaw: unknown): void {
  let manifest: UiManifest;
  try {
    manifest = validateManifest(manifestRaw);
  } catch (err) {
    showError(`Cannot load test: ${(err as Error).message}`);
    return;
  }
  let session = createSession(manifest, new Date().toISOString());
  window.EARBALLS_SESSION = () => session;
  const missing = (name: string) => showError(`Cannot load test: missing or unreadable clip ${name}`);

  // intro step: the anonymous sound used later for the memory question
  const introSection = el("section", { id: "intro-section" });
  introSection.append(el("h2", {}, "Step 1: intro sound"));
  introSection.append(
    el(
      "p",
      {},
      `Press play to hear the intro sound. It plays exactly ${INTRO_PLAY_LIMIT} times; ` +
        "remember it, you will be asked about it later.",
    ),
  );
  const introAudio = audioPlayer(manifest.intro, missing);
  introAudio.removeAttribute("controls"); // played only through the counted button
  const introBtn = el("button", { id: "intro-play", type: "button" }, "Play intro sound");
  const introCount = el("span", { id: "intro-count" }, `0/${INTRO_PLAY_LIMIT} plays`);
  const introContinue = el("button", { id: "intro-continue", type: "button", disabled: "disabled" }, "Continue to the test");
  introBtn.addEventListener("click", () => {
    session = playIntro(session);
    introCount.textContent = `${session.introPlays}/${INTRO_PLAY_LIMIT} plays`;
    void Promise.resolve(introAudio.play()).catch(() => undefined);
    if (introComplete(session)) {
      introBtn.setAttribute("disabled", "disabled");
      introContinue.removeAttribute("disabled");
    }
  });
  introSection.append(introAudio, introBtn, introCount, introContinue);

  const main = el("section", { id: "main-section", hidden: "hidden" });
  introContinue.addEventListener("click", () => {
    if (introComplete(session)) {
      main.removeAttribute("hidden");
      introSection.setAttribute("hidden", "hidden");
    }
  });

  // references
  const refs = el("section", { id: "references" });
  refs.append(el("h2", {}, "Reference sounds"));
  manifest.references.forEach((name, i) => {
    const row = el("div", { class: "ref-row" });
    row.append(el("strong", {}, `${CHOICES[i]}: `), audioPlayer(name, missing));
    refs.append(row);
  });

  const progress = el("p", { id: "progress" }, "0/9 answered");
  const refreshProgress = () => {
    progress.textContent = `${answeredCount(session)}/9 answered`;
    if (isComplete(session) && participantInput.value.trim()) {
      exportBtn.removeAttribute("disabled");
    } else {
      exportBtn.setAttribute("disabled", "disabled");
    }
  };

  // queries
  const queries = el("section", { id: "queries" });
  queries.append(el("h2", {}, "Which reference does each sound resemble most?"));
  manifest.queries.forEach((name, q) => {
    const row = el("div", { class: "query-row", id: `query-${q}` });
    row.append(el("strong", {}, `Sound ${q}: `), audioPlayer(name, missing));
    for (const choice of CHOICES) {
      const label = el("label", {}, ` ${choice}`);
      const radio = el("input", {
        type: "radio",
        name: `query-${q}`,
        id: `query-${q}-${choice}`,
        value: choice,
      });
      radio.addEventListener("change", () => {
        session = recordResponse(session, q, choice);
        refreshProgress();
      });
      label.prepend(radio);
      row.append(label);
    }
    queries.append(row);
  });

  // memorability question
  const memo = el("section", { id: "memorability" });
  memo.append(el("h2", {}, "Which reference was the intro sound?"));
  for (const choice of CHOICES) {
    const label = el("label", {}, ` ${choice}`);
    const radio = el("input", { type: "radio", name: "memo", id: `memo-${choice}`, value: choice });
    radio.addEventListener("change", () => {
      session = setMemorability(session, choice);
      refreshProgress();
    });
    label.prepend(radio);
    memo.append(label);
  }

  // export controls
  const exportSection = el("section", { id: "export" });
  const participantInput = el("input", { id: "participant-id", placeholder: "participant id" });
  participantInput.addEventListener("input", refreshProgress);
  const exportBtn = el("button", { id: "export-btn", type: "button", disabled: "disabled" }, "Export response");
  const output = el("textarea", { id: "response-json", rows: "8", readonly: "readonly" });
  const downloadLink = el("a", { id: "download-link", hidden: "hidden" }, "Download response.json");
  exportBtn.addEventListener("click", () => {
    try {
      const doc = exportResponse(session, participantInput.value, new Date().toISOString());
      const text = JSON.stringify(doc, null, 2);
      output.value = text;
      try {
        const url = URL.createObjectURL(new Blob([text], { type: "application/json" }));
        downloadLink.setAttribute("href", url);
        downloadLink.setAttribute("download", `response-${doc.participant_id}.json`);
        downloadLink.removeAttribute("hidden");
      } catch {
        // no Blob/object URLs here; the textarea copy is the fallback
      }
    } catch (err) {
      showError((err as Error).message);
    }
  });
  exportSection.append(
    el("h2", {}, "Submit"),
    participantInput,
    exportBtn,
    downloadLink,
    el("p", {}, "If the download does not start, copy the text below and send it to the test administrator."),
    output,
  );

  // displayed but non-enforcing; expiry is recorded in the exported response
  const timer = el("p", { id: "timer" }, formatClock(TIME_LIMIT_SECONDS));
  let remaining = TIME_LIMIT_SECONDS;
  const tick = setInterval(() => {
    remaining -= 1;
    if (remaining <= 0) {
      session = markTimerExpired(session);
      timer.textContent = "time limit reached (you may still finish)";
      clearInterval(tick);
      return;
    }
    timer.textContent = formatClock(remaining);
  }, 1000);

  main.append(timer, refs, queries, memo, progress, exportSection);
  root.append(el("h1", {}, "Listening test"), introSection, main);
  refreshProgress();
}

function start(): void {
  const root = document.getElementById("app");
  if (!root) {
    return;
  }
  boot(root, window.EARBALLS_MANIFEST);
}

if (typeof document !== "undefined" && document.readyState !== "loading") {
  start();
} else if (typeof document !== "undefined") {
  document.addEventListener("DOMContentLoaded", start);
}
