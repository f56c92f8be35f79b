/** Feedback transaction lifecycle on the client side.
 *
 * idle -> entering (strength input on a 0-1 control) -> submitting
 * (spinner while the fine-tune job runs) -> previewing (diverging change
 * view) -> accept/reject -> idle. Job failure reverts to idle with an
 * error banner and no view change.
 */

import type { EngineClient } from './api.js';

export type FeedbackPhase =
  | 'idle'
  | 'entering'
  | 'submitting'
  | 'previewing'
  | 'resolving';

export interface FeedbackEvents {
  onPhase?: (phase: FeedbackPhase) => void;
  onSpinner?: (on: boolean) => void;
  onError?: (message: string) => void;
  onPreviewReady?: () => void;
  onResolved?: (decision: 'accept' | 'reject', snapshotId: string) => void;
}

export function validStrength(value: number): boolean {
  return Number.isFinite(value) && value >= 0 && value <= 1;
}

export class FeedbackFlow {
  phase: FeedbackPhase = 'idle';
  cell: { row: number; col: number } | null = null;
  lastError: string | null = null;

  constructor(
    private readonly client: EngineClient,
    private readonly events: FeedbackEvents = {},
    private readonly pollIntervalMs = 150,
  ) {}

  private setPhase(phase: FeedbackPhase): void {
    this.phase = phase;
    this.events.onPhase?.(phase);
  }

  /** Open the strength control for a selected cell. */
  beginEntry(row: number, col: number): void {
    if (this.phase !== 'idle') throw new Error(`cannot enter feedback while ${this.phase}`);
    this.cell = { row, col };
    this.lastError = null;
    this.setPhase('entering');
  }

  cancelEntry(): void {
    if (this.phase !== 'entering') return;
    this.cell = null;
    this.setPhase('idle');
  }

  /** Submit an asserted strength for the selected cell; resolves once the
   * preview is ready (or the job failed). Strengths outside [0, 1] are
   * rejected client-side before any request is made. */
  async submit(strength: number, timestep: number): Promise<boolean> {
    if (this.phase !== 'entering' || this.cell === null) {
      throw new Error(`cannot submit while ${this.phase}`);
    }
    if (!validStrength(strength)) {
      this.lastError = `strength ${strength} outside the 0-1 scale`;
      this.events.onError?.(this.lastError);
      return false;
    }
    this.setPhase('submitting');
    this.events.onSpinner?.(true);
    try {
      const job = await this.client.submitFeedback([
        [this.cell.row, this.cell.col, strength, timestep],
      ]);
      let state = await this.client.pollJob(job.job_id, this.pollIntervalMs);
      while (state.state === 'running') {
        state = await this.client.pollJob(job.job_id, this.pollIntervalMs);
      }
      if (state.state === 'failed') {
        throw new Error(state.error ?? 'fine-tune job failed');
      }
      this.events.onSpinner?.(false);
      this.setPhase('previewing');
      this.events.onPreviewReady?.();
      return true;
    } catch (err) {
      this.events.onSpinner?.(false);
      this.lastError = err instanceof Error ? err.message : String(err);
      this.events.onError?.(this.lastError);
      this.cell = null;
      this.setPhase('idle');
      return false;
    }
  }

  async resolve(decision: 'accept' | 'reject'): Promise<void> {
    if (this.phase !== 'previewing') {
      throw new Error(`cannot resolve while ${this.phase}`);
    }
    this.setPhase('resolving');
    try {
      const result = await this.client.resolveFeedback(decision);
      this.events.onResolved?.(decision, result.snapshot_id);
    } finally {
      this.cell = null;
      this.setPhase('idle');
    }
  }
}
