/** Status polling at a human pace (the session advances on submits, so 1-2 s
 * is plenty), with exponential backoff while the service is unreachable. */

export interface PollTimers {
  set: (fn: () => void, ms: number) => unknown;
  clear: (handle: unknown) => void;
}

const defaultTimers: PollTimers = {
  set: (fn, ms) => setTimeout(fn, ms),
  clear: (handle) => clearTimeout(handle as Parameters<typeof clearTimeout>[0]),
};

export class PollLoop {
  private handle: unknown = null;
  private stopped = false;
  private intervalMs: number;

  constructor(
    private readonly tick: () => Promise<boolean>,
    private readonly baseMs = 1500,
    private readonly maxMs = 30_000,
    private readonly timers: PollTimers = defaultTimers,
  ) {
    this.intervalMs = baseMs;
  }

  start(): void {
    this.stopped = false;
    this.schedule(0);
  }

  stop(): void {
    this.stopped = true;
    if (this.handle !== null) {
      this.timers.clear(this.handle);
      this.handle = null;
    }
  }

  private schedule(ms: number): void {
    if (this.stopped) return;
    this.handle = this.timers.set(() => void this.run(), ms);
  }

  private async run(): Promise<void> {
    if (this.stopped) return;
    let healthy = false;
    try {
      healthy = await this.tick();
    } catch {
      healthy = false;
    }
    this.intervalMs = healthy
      ? this.baseMs
      : Math.min(this.intervalMs * 2, this.maxMs);
    this.schedule(this.intervalMs);
  }
}
