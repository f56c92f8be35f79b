/** Client view state: camera, semantic-zoom level derivation, mode, and the
 * request versioning that discards stale viewport responses. */

export type ViewMode = 'predictions' | 'change-preview';

export interface Camera {
  /** Visible-matrix cell coordinates of the top-left corner. */
  x: number;
  y: number;
  /** Pixels per cell (uniform). */
  scale: number;
}

/** Pixel-per-cell thresholds at which the displayed representation switches.
 * The budgets come from the service; the switch points are a client choice
 * keyed to readability (cells readable > ~6px, glyphs > ~24px, text panels
 * beyond that). Monotone in scale by construction. */
export const LEVEL_SCALE_THRESHOLDS: readonly [number, number][] = [
  [6, 1],
  [24, 2],
  [64, 3],
  [120, 4],
  [260, 5],
  [Infinity, 6],
];

export function levelForScale(pixelsPerCell: number): number {
  if (!(pixelsPerCell > 0)) throw new Error(`invalid scale ${pixelsPerCell}`);
  for (const [limit, level] of LEVEL_SCALE_THRESHOLDS) {
    if (pixelsPerCell < limit) return level;
  }
  return 6;
}

export interface ViewportWindow {
  level: number;
  row0: number;
  row1: number;
  col0: number;
  col1: number;
}

export class ViewState {
  camera: Camera = { x: 0, y: 0, scale: 3 };
  mode: ViewMode = 'predictions';
  /** Timestep selector; undefined = first predicted step (server default). */
  timestep: number | undefined = undefined;
  threshold = 0.1;
  selected: { row: number; col: number } | null = null;
  starred = new Set<string>();
  private requestVersion = 0;
  private appliedVersion = 0;

  constructor(
    public visibleRows: number,
    public visibleCols: number,
    public viewportPx: { width: number; height: number } = { width: 1280, height: 800 },
  ) {}

  get level(): number {
    return levelForScale(this.camera.scale);
  }

  /** Zoom about a viewport-pixel anchor; scale clamps to keep >= 1 cell visible. */
  zoomBy(factor: number, anchorPx: { x: number; y: number }): void {
    const before = this.camera.scale;
    const after = Math.min(2000, Math.max(0.5, before * factor));
    const cellX = this.camera.x + anchorPx.x / before;
    const cellY = this.camera.y + anchorPx.y / before;
    this.camera.scale = after;
    this.camera.x = cellX - anchorPx.x / after;
    this.camera.y = cellY - anchorPx.y / after;
    this.clampCamera();
  }

  panBy(dxPx: number, dyPx: number): void {
    this.camera.x += dxPx / this.camera.scale;
    this.camera.y += dyPx / this.camera.scale;
    this.clampCamera();
  }

  private clampCamera(): void {
    const wCells = this.viewportPx.width / this.camera.scale;
    const hCells = this.viewportPx.height / this.camera.scale;
    this.camera.x = Math.min(Math.max(this.camera.x, 0), Math.max(0, this.visibleCols - wCells));
    this.camera.y = Math.min(Math.max(this.camera.y, 0), Math.max(0, this.visibleRows - hCells));
  }

  /** The visible-coordinate window the current camera needs fetched. */
  window(): ViewportWindow {
    const { x, y, scale } = this.camera;
    const row0 = Math.max(0, Math.floor(y));
    const col0 = Math.max(0, Math.floor(x));
    const row1 = Math.min(this.visibleRows, Math.ceil(y + this.viewportPx.height / scale));
    const col1 = Math.min(this.visibleCols, Math.ceil(x + this.viewportPx.width / scale));
    return {
      level: this.level,
      row0,
      row1: Math.max(row1, row0 + 1),
      col0,
      col1: Math.max(col1, col0 + 1),
    };
  }

  /** Tag an outgoing viewport request. */
  nextRequest(): number {
    return ++this.requestVersion;
  }

  /** Apply a response only if nothing newer was requested meanwhile. */
  shouldApply(version: number): boolean {
    if (version < this.requestVersion) return false;
    this.appliedVersion = version;
    return true;
  }

  get lastApplied(): number {
    return this.appliedVersion;
  }

  enterChangePreview(): void {
    this.mode = 'change-preview';
  }

  exitChangePreview(): void {
    this.mode = 'predictions';
  }
}
