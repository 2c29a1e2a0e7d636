/**
 * JSON-lines client for the `nocskit bridge` stdio endpoint.
 *
 * One Python subprocess serves all calls; requests carry an id and are
 * matched to response lines, so callers can issue them concurrently. The
 * heavy numeric work happens on the Python side while this process stays
 * free.
 */

import { spawn, type ChildProcessByStdio } from "node:child_process";
import { createInterface, type Interface } from "node:readline";
import type { Readable, Writable } from "node:stream";

/** Error raised when the core reports a failure; variant names match the
 * primary error classes (e.g. "Underdetermined", "DegenerateInput"). */
export class BridgeError extends Error {
  readonly variant: string;

  constructor(variant: string, message: string) {
    super(`${variant}: ${message}`);
    this.name = "BridgeError";
    this.variant = variant;
  }
}

export interface BridgeOptions {
  /** Python interpreter (default: NOCSKIT_PYTHON env var or "python3"). */
  python?: string;
  /** Extra environment entries for the subprocess (e.g. PYTHONPATH). */
  env?: Record<string, string>;
}

interface Pending {
  resolve: (value: unknown) => void;
  reject: (reason: Error) => void;
}

export class BridgeClient {
  private proc: ChildProcessByStdio<Writable, Readable, null>;
  private reader: Interface;
  private pending = new Map<number, Pending>();
  private nextId = 1;
  private closed = false;

  constructor(options: BridgeOptions = {}) {
    const python = options.python ?? process.env.NOCSKIT_PYTHON ?? "python3";
    this.proc = spawn(python, ["-m", "nocskit.bridge"], {
      stdio: ["pipe", "pipe", "inherit"],
      env: { ...process.env, ...options.env },
    });
    this.proc.on("error", (err) => this.failAll(err));
    this.proc.on("exit", (code) => {
      if (!this.closed) {
        this.failAll(new Error(`bridge process exited with code ${code}`));
      }
    });
    this.reader = createInterface({ input: this.proc.stdout });
    this.reader.on("line", (line) => this.onLine(line));
  }

  private onLine(line: string): void {
    let response: {
      id: number;
      ok: boolean;
      result?: unknown;
      error?: { type: string; message: string };
    };
    try {
      response = JSON.parse(line);
    } catch {
      return; // stray non-protocol output
    }
    const pending = this.pending.get(response.id);
    if (!pending) {
      return;
    }
    this.pending.delete(response.id);
    if (response.ok) {
      pending.resolve(response.result);
    } else {
      const err = response.error ?? { type: "Unknown", message: "no detail" };
      pending.reject(new BridgeError(err.type, err.message));
    }
  }

  private failAll(err: Error): void {
    for (const pending of this.pending.values()) {
      pending.reject(err);
    }
    this.pending.clear();
  }

  call(op: string, args: unknown): Promise<unknown> {
    if (this.closed) {
      return Promise.reject(new Error("bridge client is closed"));
    }
    const id = this.nextId++;
    const request = JSON.stringify({ id, op, args }) + "\n";
    return new Promise((resolve, reject) => {
      this.pending.set(id, { resolve, reject });
      this.proc.stdin.write(request, (err) => {
        if (err) {
          this.pending.delete(id);
          reject(err);
        }
      });
    });
  }

  close(): void {
    this.closed = true;
    this.proc.stdin.end();
    this.reader.close();
    this.proc.kill();
  }
}
