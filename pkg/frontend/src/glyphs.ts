/** Arrow-of-time glyph geometry for the timeline levels.
 *
 * The shaft holds one segment per historical timestep (the past), the head
 * one step per predicted horizon; head steps shrink with the per-horizon
 * confidence, visually reflecting growing uncertainty. Geometry only - the
 * renderer decides colors.
 */

import type { TimelineCell } from './types.js';

export interface ShaftSegment {
  x0: number;
  x1: number;
  y: number;
  thickness: number;
  value: number;
}

export interface HeadStep {
  x0: number;
  x1: number;
  y: number;
  /** Half-height of the head at this step; shrinks with confidence. */
  halfHeight: number;
  value: number;
  confidence: number;
}

export interface ArrowGlyph {
  shaft: ShaftSegment[];
  head: HeadStep[];
}

export const SHAFT_THICKNESS_FRACTION = 0.28;
export const HEAD_BASE_FRACTION = 0.46;

/** Lay an arrow into a cell box (cell coordinates are the box's top-left
 * corner and size in pixels). Shaft value modulates nothing geometrically;
 * head size scales with confidence so later horizons read smaller. */
export function arrowGlyph(
  cell: TimelineCell,
  box: { x: number; y: number; size: number },
): ArrowGlyph {
  const steps = cell.history.length + cell.predicted.length;
  if (steps === 0) return { shaft: [], head: [] };
  if (cell.predicted.length !== cell.confidence.length) {
    throw new Error('one confidence per predicted step required');
  }
  const pad = box.size * 0.08;
  const innerX = box.x + pad;
  const innerW = box.size - 2 * pad;
  const stepW = innerW / steps;
  const midY = box.y + box.size / 2;

  const shaft: ShaftSegment[] = cell.history.map((value, i) => ({
    x0: innerX + i * stepW,
    x1: innerX + (i + 1) * stepW,
    y: midY,
    thickness: box.size * SHAFT_THICKNESS_FRACTION,
    value,
  }));

  const head: HeadStep[] = cell.predicted.map((value, h) => {
    const i = cell.history.length + h;
    const confidence = cell.confidence[h];
    return {
      x0: innerX + i * stepW,
      x1: innerX + (i + 1) * stepW,
      y: midY,
      halfHeight: (box.size * HEAD_BASE_FRACTION * confidence) / 2,
      value,
      confidence,
    };
  });
  return { shaft, head };
}
