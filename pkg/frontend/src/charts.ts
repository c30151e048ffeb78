// Small canvas line charts plus the pure series transforms they render.

import type { TrialRecord } from './api.js';

export interface Series {
  x: number[];
  y: number[];
  color: string;
  label?: string;
  step?: boolean;
  dots?: boolean;
}

export interface Point2 {
  x: number[];
  y: number[];
}

export function incumbentSeries(trials: TrialRecord[]): Point2 {
  const ok = trials.filter((t) => !t.failed && t.incumbent_score !== null);
  return { x: ok.map((t) => t.iteration), y: ok.map((t) => t.incumbent_score as number) };
}

export function scoreSeries(trials: TrialRecord[]): Point2 {
  const ok = trials.filter((t) => !t.failed && t.score !== null);
  return { x: ok.map((t) => t.iteration), y: ok.map((t) => t.score as number) };
}

export function knowledgeTrials(trials: TrialRecord[]): Point2 {
  const used = trials.filter((t) => t.used_knowledge && t.score !== null);
  return { x: used.map((t) => t.iteration), y: used.map((t) => t.score as number) };
}

export function varianceSeries(trials: TrialRecord[]): Record<string, Point2> {
  const out: Record<string, Point2> = {};
  for (const t of trials) {
    if (!t.sampling_variance) continue;
    for (const [name, value] of Object.entries(t.sampling_variance)) {
      (out[name] ??= { x: [], y: [] }).x.push(t.iteration);
      out[name].y.push(value);
    }
  }
  return out;
}

export function drawChart(canvas: HTMLCanvasElement, series: Series[],
                          opts: { markers?: number[]; yZero?: boolean } = {}): void {
  const ctx = canvas.getContext('2d');
  if (!ctx) return;
  const w = canvas.width;
  const h = canvas.height;
  ctx.clearRect(0, 0, w, h);
  const pad = { left: 46, right: 8, top: 8, bottom: 22 };

  const xs = series.flatMap((s) => s.x);
  const ys = series.flatMap((s) => s.y);
  if (xs.length === 0) return;
  const xMin = Math.min(...xs);
  const xMax = Math.max(...xs, xMin + 1);
  let yMin = Math.min(...ys);
  let yMax = Math.max(...ys);
  if (opts.yZero) yMin = Math.min(yMin, 0);
  if (yMax === yMin) yMax = yMin + 1;
  const margin = (yMax - yMin) * 0.05;
  yMin -= margin;
  yMax += margin;

  const px = (x: number) => pad.left + ((x - xMin) / (xMax - xMin)) * (w - pad.left - pad.right);
  const py = (y: number) => h - pad.bottom - ((y - yMin) / (yMax - yMin)) * (h - pad.top - pad.bottom);

  ctx.strokeStyle = '#ccc';
  ctx.fillStyle = '#666';
  ctx.font = '10px sans-serif';
  ctx.beginPath();
  ctx.moveTo(pad.left, pad.top);
  ctx.lineTo(pad.left, h - pad.bottom);
  ctx.lineTo(w - pad.right, h - pad.bottom);
  ctx.stroke();
  for (let i = 0; i <= 4; i++) {
    const y = yMin + ((yMax - yMin) * i) / 4;
    ctx.fillText(y.toPrecision(3), 2, py(y) + 3);
    const x = xMin + ((xMax - xMin) * i) / 4;
    ctx.fillText(String(Math.round(x)), px(x) - 6, h - 8);
  }

  for (const mark of opts.markers ?? []) {
    ctx.strokeStyle = '#d66';
    ctx.setLineDash([3, 3]);
    ctx.beginPath();
    ctx.moveTo(px(mark), pad.top);
    ctx.lineTo(px(mark), h - pad.bottom);
    ctx.stroke();
    ctx.setLineDash([]);
  }

  for (const s of series) {
    ctx.strokeStyle = s.color;
    ctx.fillStyle = s.color;
    if (s.dots) {
      for (let i = 0; i < s.x.length; i++) {
        ctx.beginPath();
        ctx.arc(px(s.x[i]), py(s.y[i]), 2.5, 0, Math.PI * 2);
        ctx.fill();
      }
      continue;
    }
    ctx.beginPath();
    for (let i = 0; i < s.x.length; i++) {
      const cx = px(s.x[i]);
      const cy = py(s.y[i]);
      if (i === 0) {
        ctx.moveTo(cx, cy);
      } else if (s.step) {
        ctx.lineTo(cx, py(s.y[i - 1]));
        ctx.lineTo(cx, cy);
      } else {
        ctx.lineTo(cx, cy);
      }
    }
    ctx.stroke();
  }
}
