/** Drawing abstraction: the renderer draws through this interface so tests
 * can record draw calls without a browser canvas, and the browser build
 * wraps CanvasRenderingContext2D. */

export interface DrawSurface {
  clear(width: number, height: number): void;
  fillRect(x: number, y: number, w: number, h: number, color: string): void;
  fillTriangle(
    x0: number, y0: number, x1: number, y1: number, x2: number, y2: number,
    color: string,
  ): void;
  text(x: number, y: number, content: string, color: string, sizePx: number): void;
  strokeRect(x: number, y: number, w: number, h: number, color: string): void;
}

export interface RecordedCall {
  op: 'clear' | 'rect' | 'triangle' | 'text' | 'stroke';
  color?: string;
  x?: number;
  y?: number;
  w?: number;
  h?: number;
  content?: string;
}

/** Test double that records the draw calls of the current frame; clear()
 * starts a new frame, like wiping a real canvas. */
export class RecordingSurface implements DrawSurface {
  calls: RecordedCall[] = [];

  clear(width: number, height: number): void {
    this.calls = [{ op: 'clear', w: width, h: height }];
  }

  fillRect(x: number, y: number, w: number, h: number, color: string): void {
    this.calls.push({ op: 'rect', x, y, w, h, color });
  }

  fillTriangle(
    x0: number, y0: number, _x1: number, _y1: number, _x2: number, _y2: number,
    color: string,
  ): void {
    this.calls.push({ op: 'triangle', x: x0, y: y0, color });
  }

  text(x: number, y: number, content: string, color: string, sizePx: number): void {
    this.calls.push({ op: 'text', x, y, content, color, h: sizePx });
  }

  strokeRect(x: number, y: number, w: number, h: number, color: string): void {
    this.calls.push({ op: 'stroke', x, y, w, h, color });
  }

  colorsUsed(op?: RecordedCall['op']): Set<string> {
    return new Set(
      this.calls
        .filter((c) => c.color !== undefined && (op === undefined || c.op === op))
        .map((c) => c.color as string),
    );
  }

  reset(): void {
    this.calls = [];
  }
}

/** Browser implementation over a 2D canvas context. */
export class CanvasSurface implements DrawSurface {
  constructor(private readonly ctx: CanvasRenderingContext2D) {}

  clear(width: number, height: number): void {
    this.ctx.clearRect(0, 0, width, height);
  }

  fillRect(x: number, y: number, w: number, h: number, color: string): void {
    this.ctx.fillStyle = color;
    this.ctx.fillRect(x, y, w, h);
  }

  fillTriangle(
    x0: number, y0: number, x1: number, y1: number, x2: number, y2: number,
    color: string,
  ): void {
    this.ctx.fillStyle = color;
    this.ctx.beginPath();
    this.ctx.moveTo(x0, y0);
    this.ctx.lineTo(x1, y1);
    this.ctx.lineTo(x2, y2);
    this.ctx.closePath();
    this.ctx.fill();
  }

  text(x: number, y: number, content: string, color: string, sizePx: number): void {
    this.ctx.fillStyle = color;
    this.ctx.font = `${sizePx}px sans-serif`;
    this.ctx.fillText(content, x, y);
  }

  strokeRect(x: number, y: number, w: number, h: number, color: string): void {
    this.ctx.strokeStyle = color;
    this.ctx.strokeRect(x, y, w, h);
  }
}
