// Acceptance: a 1,000-item batch scored through the bridge must match the
// CLI batch path record for record, and batch mode must equal sequential
// per-item calls.

import { spawnSync } from "node:child_process";
import { mkdtempSync, readFileSync, rmSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import {
  GoldRef,
  Scores,
  ServiceHandle,
  scoreBatch,
  spawnService,
} from "../src/client.js";

const PRESET = "mix_0.2";
const PROBLEMS = 125;
const SAMPLES = 8; // 125 x 8 = 1,000 items

let dir: string;
let goldPath: string;
let items: [GoldRef, string][];
let cliRows: any[];
let handle: ServiceHandle;

function cli(args: string[]): void {
  const res = spawnSync("python3", ["-m", "reason_forge", ...args], {
    encoding: "utf-8",
  });
  if (res.status !== 0) throw new Error(`cli failed: ${res.stderr}`);
}

/** Deterministic corruption so rewards span the full range. */
function mutate(solution: string, j: number): string {
  if (j % 4 === 1) return solution.replace("Define ", "Dfine ");
  if (j % 4 === 2) {
    const m = solution.match(/= (\d+)\./);
    if (m) {
      return solution.replace(m[0], `= ${Number(m[1]) + 3}.`);
    }
  }
  if (j % 4 === 3) {
    const parts = solution.split("Define ");
    if (parts.length > 3) {
      parts.splice(2, 1);
      return parts.join("Define ");
    }
  }
  return solution;
}

beforeAll(async () => {
  dir = mkdtempSync(join(tmpdir(), "bridge-parity-"));
  const recipePath = join(dir, "recipe.json");
  goldPath = join(dir, "gold.ndjson");
  writeFileSync(
    recipePath,
    JSON.stringify({
      phase: "post",
      mixture: [
        { opRange: "op2-5", fraction: 0.5 },
        { opRange: "op6-9", fraction: 0.5 },
      ],
      budget: { samples: PROBLEMS },
      seed: 17,
    }),
  );
  cli(["generate", "--recipe", recipePath, "--out", goldPath]);

  const records = readFileSync(goldPath, "utf-8")
    .trim()
    .split("\n")
    .map((line) => JSON.parse(line));
  expect(records).toHaveLength(PROBLEMS);

  items = [];
  const rollouts: string[] = [];
  for (const rec of records) {
    for (let j = 0; j < SAMPLES; j++) {
      const text = mutate(rec.solution, j);
      items.push([rec.id, text]);
      rollouts.push(
        JSON.stringify({ problemId: rec.id, sampleIndex: j, outputText: text }),
      );
    }
  }
  const rolloutPath = join(dir, "rollouts.ndjson");
  writeFileSync(rolloutPath, rollouts.join("\n") + "\n");

  const cliOut = join(dir, "cli_rewards.ndjson");
  cli([
    "reward",
    "--gold", goldPath,
    "--rollouts", rolloutPath,
    "--preset", PRESET,
    "--out", cliOut,
  ]);
  cliRows = readFileSync(cliOut, "utf-8")
    .trim()
    .split("\n")
    .map((line) => JSON.parse(line));

  handle = await spawnService({
    command: ["python3", "-m", "reason_forge", "serve", "--corpus", goldPath],
    rewardPreset: PRESET,
    timeoutMs: 150_000,
  });
});

afterAll(async () => {
  await handle?.shutdown();
  rmSync(dir, { recursive: true, force: true });
});

describe("bridge parity at 1,000 items", () => {
  it("matches the CLI batch path record for record", async () => {
    const out = await scoreBatch(handle, items);
    expect(out).toHaveLength(1000);
    expect(cliRows).toHaveLength(1000);
    let mismatches = 0;
    for (let i = 0; i < out.length; i++) {
      const b = out[i] as Scores;
      const c = cliRows[i];
      if (
        b.reward !== c.reward ||
        b.processAcc !== c.processAcc ||
        b.answerCorrect !== c.answerCorrect ||
        b.verifiedCorrect !== c.verifiedCorrect
      ) {
        mismatches++;
      }
    }
    expect(mismatches).toBe(0);
    // the corruption schedule must actually exercise the reward range
    const rewards = out.map((r) => (r as Scores).reward);
    expect(new Set(rewards).size).toBeGreaterThan(3);
    expect(rewards.some((r) => r === 1)).toBe(true);
    expect(rewards.some((r) => r < 1)).toBe(true);
  });

  it("batch equals per-item sequential calls", async () => {
    const slice = items.filter((_, i) => i % 20 === 0); // 50 spread items
    const batch = await scoreBatch(handle, slice);
    for (let i = 0; i < slice.length; i++) {
      const [single] = await scoreBatch(handle, [slice[i]]);
      expect(single).toEqual(batch[i]);
    }
  });
});
