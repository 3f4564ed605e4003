"use strict";
(() => {
  // src/schema.ts
  var REFERENCE_COUNT = 3;
  var QUERY_COUNT = 8;
  var INTRO_PLAY_LIMIT = 3;
  var TIME_LIMIT_SECONDS = 15 * 60;
  var CHOICES = ["A", "B", "C"];
  var FORBIDDEN_FIELDS = [
    "key",
    ["answer", "key"].join("_"),
    "answers",
    ["memorability", "choice"].join("_"),
    "labels"
  ];
  function isChoice(value) {
    return typeof value === "string" && CHOICES.includes(value);
  }
  function validateManifest(raw) {
    var _a;
    if (typeof raw !== "object" || raw === null) {
      throw new Error("manifest must be an object");
    }
    const data = raw;
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
        `manifest lists ${clipCount} clips, expected ${REFERENCE_COUNT} references and ${QUERY_COUNT} queries`
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
      schema_version: Number((_a = data.schema_version) != null ? _a : 1),
      package_id: data.package_id,
      references,
      queries,
      intro: data.intro
    };
  }

  // src/session.ts
  function createSession(manifest, startedAt) {
    return {
      manifest,
      introPlays: 0,
      answers: {},
      memorability: null,
      startedAt,
      timerExpired: false
    };
  }
  function playIntro(session) {
    if (session.introPlays >= INTRO_PLAY_LIMIT) {
      return session;
    }
    return { ...session, introPlays: session.introPlays + 1 };
  }
  function introComplete(session) {
    return session.introPlays >= INTRO_PLAY_LIMIT;
  }
  function recordResponse(session, queryId, choice) {
    const id = String(queryId);
    const valid = /^[0-9]+$/.test(id) && Number(id) >= 0 && Number(id) < QUERY_COUNT;
    if (!valid || !isChoice(choice)) {
      return session;
    }
    return { ...session, answers: { ...session.answers, [id]: choice } };
  }
  function setMemorability(session, choice) {
    if (!isChoice(choice)) {
      return session;
    }
    return { ...session, memorability: choice };
  }
  function markTimerExpired(session) {
    return { ...session, timerExpired: true };
  }
  function answeredCount(session) {
    let n = Object.keys(session.answers).length;
    if (session.memorability !== null) {
      n += 1;
    }
    return n;
  }
  function isComplete(session) {
    for (let q = 0; q < QUERY_COUNT; q += 1) {
      if (!(String(q) in session.answers)) {
        return false;
      }
    }
    return session.memorability !== null;
  }
  function exportResponse(session, participantId, submittedAt) {
    if (!participantId.trim()) {
      throw new Error("participant id is required");
    }
    if (!isComplete(session)) {
      throw new Error("session incomplete: answer all 8 queries and the intro-sound question");
    }
    const answers = {};
    for (let q = 0; q < QUERY_COUNT; q += 1) {
      answers[String(q)] = session.answers[String(q)];
    }
    return {
      schema_version: 1,
      package_id: session.manifest.package_id,
      answers,
      memorability: session.memorability,
      participant_id: participantId.trim(),
      started_at: session.startedAt,
      submitted_at: submittedAt,
      timer_expired: session.timerExpired
    };
  }

  // src/main.ts
  function el(tag, attrs = {}, text = "") {
    const node = document.createElement(tag);
    for (const [key, value] of Object.entries(attrs)) {
      node.setAttribute(key, value);
    }
    if (text) {
      node.textContent = text;
    }
    return node;
  }
  function showError(message) {
    var _a;
    const banner = (_a = document.getElementById("error-banner")) != null ? _a : el("div", { id: "error-banner" });
    banner.textContent = message;
    banner.setAttribute("class", "error");
    document.body.prepend(banner);
  }
  function audioPlayer(src, onMissing) {
    const audio = el("audio", { src, controls: "controls", preload: "auto" });
    audio.addEventListener("error", () => onMissing(src));
    return audio;
  }
  function formatClock(seconds) {
    const m = Math.floor(seconds / 60);
    const s = seconds % 60;
    return `${m}:${String(s).padStart(2, "0")}`;
  }
  function boot(root, manifestRaw) {
    let manifest;
    try {
      manifest = validateManifest(manifestRaw);
    } catch (err) {
      showError(`Cannot load test: ${err.message}`);
      return;
    }
    let session = createSession(manifest, (/* @__PURE__ */ new Date()).toISOString());
    window.EARBALLS_SESSION = () => session;
    const missing = (name) => showError(`Cannot load test: missing or unreadable clip ${name}`);
    const introSection = el("section", { id: "intro-section" });
    introSection.append(el("h2", {}, "Step 1: intro sound"));
    introSection.append(
      el(
        "p",
        {},
        `Press play to hear the intro sound. It plays exactly ${INTRO_PLAY_LIMIT} times; remember it, you will be asked about it later.`
      )
    );
    const introAudio = audioPlayer(manifest.intro, missing);
    introAudio.removeAttribute("controls");
    const introBtn = el("button", { id: "intro-play", type: "button" }, "Play intro sound");
    const introCount = el("span", { id: "intro-count" }, `0/${INTRO_PLAY_LIMIT} plays`);
    const introContinue = el("button", { id: "intro-continue", type: "button", disabled: "disabled" }, "Continue to the test");
    introBtn.addEventListener("click", () => {
      session = playIntro(session);
      introCount.textContent = `${session.introPlays}/${INTRO_PLAY_LIMIT} plays`;
      void Promise.resolve(introAudio.play()).catch(() => void 0);
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
          value: choice
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
    const exportSection = el("section", { id: "export" });
    const participantInput = el("input", { id: "participant-id", placeholder: "participant id" });
    participantInput.addEventListener("input", refreshProgress);
    const exportBtn = el("button", { id: "export-btn", type: "button", disabled: "disabled" }, "Export response");
    const output = el("textarea", { id: "response-json", rows: "8", readonly: "readonly" });
    const downloadLink = el("a", { id: "download-link", hidden: "hidden" }, "Download response.json");
    exportBtn.addEventListener("click", () => {
      try {
        const doc = exportResponse(session, participantInput.value, (/* @__PURE__ */ new Date()).toISOString());
        const text = JSON.stringify(doc, null, 2);
        output.value = text;
        try {
          const url = URL.createObjectURL(new Blob([text], { type: "application/json" }));
          downloadLink.setAttribute("href", url);
          downloadLink.setAttribute("download", `response-${doc.participant_id}.json`);
          downloadLink.removeAttribute("hidden");
        } catch {
        }
      } catch (err) {
        showError(err.message);
      }
    });
    exportSection.append(
      el("h2", {}, "Submit"),
      participantInput,
      exportBtn,
      downloadLink,
      el("p", {}, "If the download does not start, copy the text below and send it to the test administrator."),
      output
    );
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
    }, 1e3);
    main.append(timer, refs, queries, memo, progress, exportSection);
    root.append(el("h1", {}, "Listening test"), introSection, main);
    refreshProgress();
  }
  function start() {
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
})();
