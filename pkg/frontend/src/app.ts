/** Application shell tying view state, the service client, the renderer,
 * and the feedback lifecycle together. DOM-free so scripted tests can drive
 * the full zoom/feedback loop headlessly; main.ts adds browser chrome. */

import { EngineClient } from './api.js';
import { FeedbackFlow, type FeedbackEvents } from './feedback.js';
import { HierarchyEditor } from './hierarchy.js';
import { LevelMismatchError, renderViewport, type RenderGeometry } from './render.js';
import { ViewState } from './state.js';
import type { DrawSurface } from './surface.js';
import type { LevelPayload, SessionInfo } from './types.js';

export class App {
  readonly feedback: FeedbackFlow;
  readonly hierarchy: HierarchyEditor;
  lastPayload: LevelPayload | null = null;
  lastRenderedMode: 'predictions' | 'change-preview' | null = null;

  private constructor(
    readonly client: EngineClient,
    readonly state: ViewState,
    readonly surface: DrawSurface,
    public info: SessionInfo,
    feedbackEvents: FeedbackEvents,
  ) {
    this.feedback = new FeedbackFlow(client, {
      ...feedbackEvents,
      onPreviewReady: () => {
        this.state.enterChangePreview();
        feedbackEvents.onPreviewReady?.();
      },
      onResolved: (decision, snapshotId) => {
        this.state.exitChangePreview();
        feedbackEvents.onResolved?.(decision, snapshotId);
      },
    });
    this.hierarchy = new HierarchyEditor(client);
  }

  static async create(
    base: string,
    surface: DrawSurface,
    options: {
      fetchFn?: typeof fetch;
      viewportPx?: { width: number; height: number };
      feedbackEvents?: FeedbackEvents;
    } = {},
  ): Promise<App> {
    const client = new EngineClient(base, options.fetchFn ?? fetch);
    const info = await client.openSession();
    const state = new ViewState(
      info.axis.rows.length,
      info.axis.cols.length,
      options.viewportPx ?? { width: 1280, height: 800 },
    );
    state.threshold = info.threshold;
    return new App(client, state, surface, info, options.feedbackEvents ?? {});
  }

  private geometry(): RenderGeometry {
    return { camera: this.state.camera, viewportPx: this.state.viewportPx };
  }

  /** Fetch the current window and draw it. Stale responses (superseded by a
   * newer request) are discarded; a payload whose level no longer matches
   * the view triggers one refetch. */
  async refresh(depth = 0): Promise<LevelPayload | null> {
    const version = this.state.nextRequest();
    const win = this.state.window();
    const changeMode = this.state.mode === 'change-preview';
    const payload = await this.client.viewport({
      level: changeMode ? 2 : win.level,
      row0: win.row0,
      row1: win.row1,
      col0: win.col0,
      col1: win.col1,
      t: this.state.timestep,
      mode: changeMode ? 'change' : 'predictions',
    });
    if (!this.state.shouldApply(version)) return null; // stale, a newer view is in flight
    try {
      renderViewport(win.level, this.state.mode, payload, this.surface, this.geometry());
    } catch (err) {
      if (err instanceof LevelMismatchError && depth < 2) return this.refresh(depth + 1);
      throw err;
    }
    this.lastPayload = payload;
    this.lastRenderedMode = this.state.mode;
    return payload;
  }

  async zoom(factor: number, anchorPx = { x: 640, y: 400 }): Promise<LevelPayload | null> {
    this.state.zoomBy(factor, anchorPx);
    return this.refresh();
  }

  async pan(dxPx: number, dyPx: number): Promise<LevelPayload | null> {
    this.state.panBy(dxPx, dyPx);
    return this.refresh();
  }

  /** Zoom until the view sits at the requested semantic level. */
  async zoomToLevel(level: number): Promise<LevelPayload | null> {
    let guard = 0;
    while (this.state.level < level && guard++ < 64) this.state.zoomBy(1.4, { x: 0, y: 0 });
    while (this.state.level > level && guard++ < 128) this.state.zoomBy(1 / 1.4, { x: 0, y: 0 });
    if (this.state.level !== level) throw new Error(`cannot reach level ${level}`);
    return this.refresh();
  }

  async setThreshold(threshold: number): Promise<void> {
    const result = await this.client.setThreshold(threshold);
    this.state.threshold = result.threshold ?? threshold;
    await this.refresh();
  }

  /** Enter feedback on a cell and submit an asserted strength. On success
   * the view switches to the diverging change preview. */
  async assertStrength(
    row: number,
    col: number,
    strength: number,
    timestep: number,
  ): Promise<boolean> {
    this.feedback.beginEntry(row, col);
    const ok = await this.feedback.submit(strength, timestep);
    if (ok) await this.refresh();
    return ok;
  }

  async resolveFeedback(decision: 'accept' | 'reject'): Promise<void> {
    await this.feedback.resolve(decision);
    this.info = await this.client.sessionInfo();
    await this.refresh();
  }
}
