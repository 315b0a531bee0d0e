// Thin stdio client for the scoring service: serialization and transport
// only, no reward logic on this side.  One handle wraps one subprocess;
// trainer workers should each spawn (or hold) their own handle.

import { ChildProcess, spawn } from "node:child_process";
import { createInterface } from "node:readline";

export const WIRE_VERSION = 1;
export const DEFAULT_COMMAND = ["python3", "-m", "reason_forge", "serve"];
const DEFAULT_TIMEOUT_MS = 60_000;

export interface ClientConfig {
  /** argv of the service; defaults to the installed Python package. */
  command?: string[];
  cwd?: string;
  /** per-call deadline, milliseconds; must be positive. */
  timeoutMs?: number;
  /** reward preset attached to every request that does not name one. */
  rewardPreset?: string;
}

/** corpusId string, or an inline gold graph in wire form. */
export type GoldRef = string | Record<string, unknown>;

export interface Scores {
  reward: number;
  processAcc: number;
  answerCorrect: boolean;
  verifiedCorrect: boolean;
}

export interface ScoreError {
  error: string;
}

export type ScoreResult = Scores | ScoreError;

export class SpawnFailed extends Error {
  readonly stderr: string;
  constructor(message: string, stderr = "") {
    super(stderr.trim() ? `${message}: ${stderr.trim()}` : message);
    this.name = "SpawnFailed";
    this.stderr = stderr;
  }
}

export class BridgeTimeout extends Error {
  constructor(message: string) {
    super(message);
    this.name = "BridgeTimeout";
  }
}

function checkTimeout(ms: number): number {
  if (!(ms > 0)) throw new RangeError(`timeoutMs must be positive, got ${ms}`);
  return ms;
}

export class ServiceHandle {
  readonly rewardPreset?: string;
  readonly timeoutMs: number;
  private readonly child: ChildProcess;
  private readonly pending = new Map<string, (resp: any) => void>();
  private readonly exited: Promise<number | null>;
  private seq = 0;
  private stderrTail = "";
  private down: string | null = null;
  private closing = false;

  constructor(child: ChildProcess, config: ClientConfig) {
    this.child = child;
    this.timeoutMs = checkTimeout(config.timeoutMs ?? DEFAULT_TIMEOUT_MS);
    this.rewardPreset = config.rewardPreset;

    const rl = createInterface({ input: child.stdout!, crlfDelay: Infinity });
    rl.on("line", (line) => {
      let resp: any;
      try {
        resp = JSON.parse(line);
      } catch {
        return; // not ours; the service never emits partial lines
      }
      const waiter = this.pending.get(String(resp?.id));
      if (waiter) {
        this.pending.delete(String(resp.id));
        waiter(resp);
      }
    });
    child.stderr!.on("data", (chunk: Buffer) => {
      this.stderrTail = (this.stderrTail + chunk.toString()).slice(-4096);
    });
    child.stdin!.on("error", () => {
      // EPIPE after the service died; the exit path reports it
    });
    this.exited = new Promise((resolve) => {
      child.on("error", (err) => {
        this.fail(String(err));
        resolve(null); // spawn failure: no exit event will follow
      });
      child.on("exit", (code) => {
        this.fail(`service exited with code ${code}`);
        resolve(code);
      });
    });
  }

  private fail(reason: string): void {
    if (this.down === null) this.down = reason;
    for (const [id, waiter] of this.pending) {
      this.pending.delete(id);
      waiter({ id, error: this.down });
    }
  }

  get lastStderr(): string {
    return this.stderrTail;
  }

  /** Send one request object; resolves with the correlated response. */
  request(payload: Record<string, unknown>): Promise<any> {
    const id = `q${++this.seq}`;
    if (this.down !== null || this.closing) {
      return Promise.resolve({ id, error: this.down ?? "handle is shut down" });
    }
    return new Promise((resolve) => {
      this.pending.set(id, resolve);
      try {
        this.child.stdin!.write(
          JSON.stringify({ v: WIRE_VERSION, id, ...payload }) + "\n",
        );
      } catch (err) {
        this.pending.delete(id);
        resolve({ id, error: String(err) });
      }
    });
  }

  /** Health check: true iff the service answers a ping before the deadline. */
  async ping(timeoutMs?: number): Promise<boolean> {
    const resp = await withDeadline(
      this.request({ ping: true }),
      timeoutMs ?? this.timeoutMs,
      "ping",
    ).catch(() => null);
    return resp?.pong === true;
  }

  /** Close stdin and wait for the drain; safe to call any number of times. */
  async shutdown(): Promise<number | null> {
    if (!this.closing) {
      this.closing = true;
      try {
        this.child.stdin!.end();
      } catch {
        // already gone
      }
      const killer = setTimeout(() => this.child.kill("SIGTERM"), 10_000);
      killer.unref();
      this.exited.then(() => clearTimeout(killer));
    }
    return this.exited;
  }
}

function withDeadline<T>(p: Promise<T>, ms: number, what: string): Promise<T> {
  checkTimeout(ms);
  let timer: NodeJS.Timeout;
  const gate = new Promise<never>((_, reject) => {
    timer = setTimeout(
      () => reject(new BridgeTimeout(`${what} exceeded ${ms}ms`)),
      ms,
    );
  });
  return Promise.race([p, gate]).finally(() => clearTimeout(timer)) as Promise<T>;
}

/** Spawn the service, health-check it, and hand back a live handle. */
export async function spawnService(
  config: ClientConfig = {},
): Promise<ServiceHandle> {
  const command = config.command ?? DEFAULT_COMMAND;
  const child = spawn(command[0], command.slice(1), {
    cwd: config.cwd,
    stdio: ["pipe", "pipe", "pipe"],
  });
  const handle = new ServiceHandle(child, config);
  if (!(await handle.ping())) {
    const stderr = handle.lastStderr;
    child.kill("SIGKILL");
    await handle.shutdown();
    throw new SpawnFailed(`service did not come up: ${command.join(" ")}`, stderr);
  }
  return handle;
}

/**
 * Score rollouts in order.  Each item pairs a gold reference (corpusId or
 * inline graph) with solution text; each result is scores or a per-item
 * error entry.  The whole batch shares one deadline.
 */
export async function scoreBatch(
  handle: ServiceHandle,
  items: ReadonlyArray<readonly [GoldRef, string]>,
  opts: { rewardPreset?: string; timeoutMs?: number } = {},
): Promise<ScoreResult[]> {
  if (items.length === 0) return [];
  const preset = opts.rewardPreset ?? handle.rewardPreset;
  const responses = items.map(([gold, solution]) => {
    const req: Record<string, unknown> = { solutionText: solution };
    if (typeof gold === "string") req.corpusId = gold;
    else req.goldGraph = gold;
    if (preset !== undefined) req.rewardConfig = preset;
    return handle.request(req);
  });
  const settled = await withDeadline(
    Promise.all(responses),
    opts.timeoutMs ?? handle.timeoutMs,
    `batch of ${items.length}`,
  );
  return settled.map((resp): ScoreResult =>
    resp.error !== undefined
      ? { error: String(resp.error) }
      : {
          reward: resp.reward,
          processAcc: resp.processAcc,
          answerCorrect: resp.answerCorrect,
          verifiedCorrect: resp.verifiedCorrect,
        },
  );
}

// snake_case aliases for callers following the service's naming
export { scoreBatch as score_batch, spawnService as spawn_service };
