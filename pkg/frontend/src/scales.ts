/** Color scales. Predictions use a single-hue sequential ramp; change
 * previews use a diverging ramp through white. The two must stay visually
 * distinct so it is immediately apparent which one is on screen; the test
 * suite asserts their sampled palettes are disjoint. */

function lerp(a: number, b: number, t: number): number {
  return a + (b - a) * t;
}

function hex2(v: number): string {
  return Math.round(v).toString(16).padStart(2, '0');
}

function rgb(r: number, g: number, b: number): string {
  return `#${hex2(r)}${hex2(g)}${hex2(b)}`;
}

function assertUnit(value: number, what: string): void {
  if (!Number.isFinite(value) || value < 0 || value > 1) {
    throw new Error(`${what} must lie in [0, 1], got ${value}`);
  }
}

/** Sequential scale for prediction strengths in [0, 1]: pale mint to deep teal. */
export function predictionColor(strength: number): string {
  assertUnit(strength, 'prediction strength');
  const t = strength;
  return rgb(lerp(237, 4, t), lerp(248, 90, t), lerp(244, 98, t));
}

/** Diverging scale for deltas in [-1, 1]: indigo for negative, white for
 * zero, vermilion for positive. No color overlaps the prediction ramp. */
export function changeColor(delta: number): string {
  if (!Number.isFinite(delta) || delta < -1 || delta > 1) {
    throw new Error(`change delta must lie in [-1, 1], got ${delta}`);
  }
  if (delta < 0) {
    const t = -delta;
    return rgb(lerp(255, 73, t), lerp(255, 57, t), lerp(255, 170, t));
  }
  const t = delta;
  return rgb(lerp(255, 213, t), lerp(255, 94, t), lerp(255, 34, t));
}

export interface LegendTick {
  value: number;
  color: string;
  label: string;
}

/** Legend entries for the active scale (an explicit legend was a direct
 * expert request; always rendered with the grid). */
export function legendTicks(mode: 'predictions' | 'change-preview', steps = 5): LegendTick[] {
  const ticks: LegendTick[] = [];
  if (mode === 'predictions') {
    for (let i = 0; i < steps; i++) {
      const v = i / (steps - 1);
      ticks.push({ value: v, color: predictionColor(v), label: v.toFixed(2) });
    }
  } else {
    for (let i = 0; i < steps; i++) {
      const v = -1 + (2 * i) / (steps - 1);
      const label = v > 0 ? `+${v.toFixed(2)}` : v.toFixed(2);
      ticks.push({ value: v, color: changeColor(v), label });
    }
  }
  return ticks;
}

/** Sample both ramps; used to verify the scales never share a color. */
export function samplePalettes(samples = 21): { prediction: string[]; change: string[] } {
  const prediction: string[] = [];
  const change: string[] = [];
  for (let i = 0; i < samples; i++) {
    prediction.push(predictionColor(i / (samples - 1)));
    change.push(changeColor(-1 + (2 * i) / (samples - 1)));
  }
  return { prediction, change };
}
