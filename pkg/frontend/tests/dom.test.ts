// @vitest-environment happy-dom
import { beforeEach, describe, expect, it } from "vitest";
import { boot } from "../src/main";

const MANIFEST = {
  schema_version: 1,
  package_id: "pkg-dom",
  references: ["A.wav", "B.wav", "C.wav"],
  queries: Array.from({ length: 8 }, (_, i) => `${i}.wav`),
  intro: "intro.wav",
};

function mount(manifest: unknown = MANIFEST) {
  document.body.innerHTML = '<div id="app"></div>';
  boot(document.getElementById("app")!, manifest);
}

function click(id: string) {
  const node = document.getElementById(id);
  expect(node, `#${id} should exist`).toBeTruthy();
  node!.click();
}

describe("page boot", () => {
  beforeEach(() => {
    document.body.innerHTML = "";
  });

  it("renders the intro step plus 11 players", () => {
    mount();
    expect(document.getElementById("intro-section")).toBeTruthy();
    expect(document.querySelectorAll("audio").length).toBe(12); // intro + 3 refs + 8 queries
    expect(document.querySelectorAll(".query-row").length).toBe(8);
  });

  it("shows a blocking banner for a 12-clip manifest", () => {
    mount({ ...MANIFEST, queries: [...MANIFEST.queries, "8.wav"] });
    expect(document.getElementById("error-banner")?.textContent).toMatch(/12 clips/);
  });

  it("refuses a tampered manifest containing a key field", () => {
    mount({ ...MANIFEST, key: { "0": "A" } });
    expect(document.getElementById("error-banner")?.textContent).toMatch(/blinded/);
    expect(document.getElementById("main-section")).toBeFalsy();
  });
});

describe("test flow", () => {
  beforeEach(() => {
    document.body.innerHTML = "";
    mount();
  });

  it("unlocks the main section only after three intro plays", () => {
    const main = document.getElementById("main-section")!;
    expect(main.hasAttribute("hidden")).toBe(true);
    click("intro-continue"); // ignored while locked
    expect(main.hasAttribute("hidden")).toBe(true);
    click("intro-play");
    click("intro-play");
    expect(document.getElementById("intro-play")!.hasAttribute("disabled")).toBe(false);
    click("intro-play");
    expect(document.getElementById("intro-play")!.hasAttribute("disabled")).toBe(true);
    click("intro-continue");
    expect(main.hasAttribute("hidden")).toBe(false);
  });

  it("enables export only when all 9 answers and an id are present", () => {
    const exportBtn = document.getElementById("export-btn")!;
    for (let q = 0; q < 8; q += 1) {
      click(`query-${q}-A`);
    }
    expect(exportBtn.hasAttribute("disabled")).toBe(true); // memorability missing
    click("memo-B");
    expect(exportBtn.hasAttribute("disabled")).toBe(true); // id missing
    const input = document.getElementById("participant-id") as HTMLInputElement;
    input.value = "p9";
    input.dispatchEvent(new Event("input"));
    expect(exportBtn.hasAttribute("disabled")).toBe(false);
    expect(document.getElementById("progress")!.textContent).toBe("9/9 answered");
  });

  it("exports the response JSON through the textarea", () => {
    for (let q = 0; q < 8; q += 1) {
      click(`query-${q}-${"ABC"[q % 3]}`);
    }
    click("query-3-C"); // overwrite
    click("memo-C");
    const input = document.getElementById("participant-id") as HTMLInputElement;
    input.value = "participant-7";
    input.dispatchEvent(new Event("input"));
    click("export-btn");
    const doc = JSON.parse((document.getElementById("response-json") as HTMLTextAreaElement).value);
    expect(doc.package_id).toBe("pkg-dom");
    expect(doc.participant_id).toBe("participant-7");
    expect(doc.answers["3"]).toBe("C");
    expect(doc.memorability).toBe("C");
    expect(Object.keys(doc.answers)).toHaveLength(8);
  });
});
