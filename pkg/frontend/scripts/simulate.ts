/**
 * Scripted browser session against an emitted package.
 *
 * Usage: node dist/simulate.mjs <participant-dir> <answers.json> <out.json>
 *
 * Loads the package's real index.html, manifest.js, and app.js into a DOM,
 * plays the intro three times, clicks the answer radios given in
 * answers.json ({"answers": {"0": "A", ...}, "memorability": "B",
 * "participant_id": "p1"}), exports, and writes the response JSON the page
 * produced to <out.json>.
 */

import { readFileSync, writeFileSync } from "node:fs";
import { join } from "node:path";
import { Window } from "happy-dom";

function fail(message: string): never {
  console.error(`simulate: ${message}`);
  process.exit(1);
}

const [participantDir, answersPath, outPath] = process.argv.slice(2);
if (!participantDir || !answersPath || !outPath) {
  fail("usage: simulate <participant-dir> <answers.json> <out.json>");
}

const plan = JSON.parse(readFileSync(answersPath, "utf-8")) as {
  answers: Record<string, string>;
  memorability: string;
  participant_id: string;
};

const html = readFileSync(join(participantDir, "index.html"), "utf-8");
const window = new Window({ url: "file:///test/index.html" });
const document = window.document;
document.write(html);

// run the package's own scripts in page order, like a browser would
for (const name of ["manifest.js", "app.js"]) {
  const source = readFileSync(join(participantDir, name), "utf-8");
  window.eval(source);
}

const click = (id: string) => {
  const node = document.getElementById(id);
  if (!node) {
    fail(`missing element #${id}`);
  }
  (node as unknown as { click(): void }).click();
};

const banner = document.getElementById("error-banner");
if (banner) {
  fail(`page refused to load: ${banner.textContent}`);
}

// intro step: exactly three counted plays, then continue
for (let i = 0; i < 3; i += 1) {
  click("intro-play");
}
const introCount = document.getElementById("intro-count");
if (introCount?.textContent !== "3/3 plays") {
  fail(`intro play counter reads ${introCount?.textContent ?? "nothing"}`);
}
click("intro-continue");
const main = document.getElementById("main-section");
if (main?.hasAttribute("hidden")) {
  fail("main section did not unlock after the intro step");
}

const exportBtn = document.getElementById("export-btn");
if (!exportBtn!.hasAttribute("disabled")) {
  fail("export enabled before any answers were given");
}

for (const [query, choice] of Object.entries(plan.answers)) {
  click(`query-${query}-${choice}`);
}
click(`memo-${plan.memorability}`);

const participant = document.getElementById("participant-id") as unknown as { value: string; dispatchEvent(e: unknown): boolean };
participant.value = plan.participant_id;
participant.dispatchEvent(new window.Event("input"));

if (exportBtn!.hasAttribute("disabled")) {
  fail("export still disabled after completing every question");
}
click("export-btn");

const output = document.getElementById("response-json") as unknown as { value: string };
if (!output.value) {
  fail("no response JSON produced");
}
writeFileSync(outPath, output.value);
console.log(`response written to ${outPath}`);
void window.happyDOM.close();
