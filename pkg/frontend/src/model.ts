// Prior-builder form state, client-side validation, and the wire format.
//
// The form mirrors the server's interaction dialect: a submission is either
// a point assignment (flat value map) or a set of per-hyperparameter
// distributions, over any subset of the space. Client validation repeats
// the server's domain rules so most mistakes never leave the page.

import type { HyperparameterDoc, SpaceDoc } from './api.js';

export type PriorMode = 'skip' | 'point' | 'uniform' | 'normal' | 'weights';

export interface HyperparameterForm {
  name: string;
  mode: PriorMode;
  point: string;
  lo: string;
  hi: string;
  mu: string;
  sigma: string;
  weights: number[];
}

export function availableModes(hp: HyperparameterDoc): PriorMode[] {
  if (hp.type === 'cat') return ['skip', 'point', 'weights'];
  if (hp.type === 'int') return ['skip', 'point', 'uniform'];
  return ['skip', 'point', 'uniform', 'normal'];
}

// Categorical sliders start uniform; normal sigma defaults to 10% of the
// domain width.
export function defaultForm(hp: HyperparameterDoc): HyperparameterForm {
  const [lo, hi] = hp.range ?? [0, 1];
  const mid = (lo + hi) / 2;
  return {
    name: hp.name,
    mode: 'skip',
    point: hp.type === 'cat' ? (hp.labels?.[0] ?? '') : String(mid),
    lo: String(lo),
    hi: String(hi),
    mu: String(mid),
    sigma: String((hi - lo) / 10),
    weights: hp.labels ? hp.labels.map(() => 1) : [],
  };
}

export interface ValidationResult {
  errors: Record<string, string>;
  active: HyperparameterForm[];
}

export function validateForms(space: SpaceDoc,
                              forms: HyperparameterForm[]): ValidationResult {
  const errors: Record<string, string> = {};
  const active = forms.filter((f) => f.mode !== 'skip');
  if (active.length === 0) {
    errors['*'] = 'select at least one hyperparameter';
    return { errors, active };
  }
  const kinds = new Set(active.map((f) => (f.mode === 'point' ? 'point' : 'dist')));
  if (kinds.size > 1) {
    errors['*'] = 'one submission is either all point values or all distributions';
  }

  for (const form of active) {
    const hp = space.hyperparameters.find((h) => h.name === form.name);
    if (!hp) {
      errors[form.name] = 'unknown hyperparameter';
      continue;
    }
    const [dlo, dhi] = hp.range ?? [NaN, NaN];
    if (form.mode === 'point') {
      if (hp.type === 'cat') {
        if (!hp.labels?.includes(form.point)) {
          errors[form.name] = `label must be one of ${hp.labels?.join(', ')}`;
        }
      } else {
        const v = Number(form.point);
        if (!Number.isFinite(v)) errors[form.name] = 'value must be a number';
        else if (hp.type === 'int' && !Number.isInteger(v)) {
          errors[form.name] = 'value must be an integer';
        } else if (v < dlo || v > dhi) {
          errors[form.name] = `value outside [${dlo}, ${dhi}]`;
        }
      }
    } else if (form.mode === 'uniform') {
      const lo = Number(form.lo);
      const hi = Number(form.hi);
      if (!Number.isFinite(lo) || !Number.isFinite(hi)) {
        errors[form.name] = 'bounds must be numbers';
      } else if (!(lo < hi)) {
        errors[form.name] = 'needs lo < hi';
      } else if (hp.type === 'int' && (!Number.isInteger(lo) || !Number.isInteger(hi))) {
        errors[form.name] = 'integer domain needs integer bounds';
      } else if (lo < dlo || hi > dhi) {
        errors[form.name] = `support exceeds domain [${dlo}, ${dhi}]`;
      }
    } else if (form.mode === 'normal') {
      const mu = Number(form.mu);
      const sigma = Number(form.sigma);
      if (!Number.isFinite(mu) || !Number.isFinite(sigma)) {
        errors[form.name] = 'mu and sigma must be numbers';
      } else if (sigma <= 0) {
        errors[form.name] = 'sigma must be > 0';
      } else if (mu < dlo || mu > dhi) {
        errors[form.name] = `mean outside domain [${dlo}, ${dhi}]`;
      }
    } else if (form.mode === 'weights') {
      if (form.weights.some((w) => w < 0)) {
        errors[form.name] = 'weights must be non-negative';
      } else if (!form.weights.some((w) => w > 0)) {
        errors[form.name] = 'at least one weight must be positive';
      }
    }
  }
  return { errors, active };
}

// The interaction object POSTed to /knowledge (no iteration key: the server
// applies it at the next boundary).
export function buildInteraction(space: SpaceDoc,
                                 forms: HyperparameterForm[]): object | null {
  const { errors, active } = validateForms(space, forms);
  if (Object.keys(errors).length > 0) return null;
  const allPoints = active.every((f) => f.mode === 'point');
  const intervention: Record<string, unknown> = {};
  for (const form of active) {
    const hp = space.hyperparameters.find((h) => h.name === form.name)!;
    if (form.mode === 'point') {
      intervention[form.name] = hp.type === 'cat' ? form.point : Number(form.point);
    } else if (form.mode === 'uniform') {
      intervention[form.name] = {
        dist: hp.type === 'int' ? 'int_uniform' : 'uniform',
        parameters: [Number(form.lo), Number(form.hi)],
      };
    } else if (form.mode === 'normal') {
      intervention[form.name] = {
        dist: 'normal',
        parameters: [Number(form.mu), Number(form.sigma)],
      };
    } else {
      intervention[form.name] = { dist: 'cat', parameters: [...form.weights] };
    }
  }
  return { type: 'dashboard', kind: allPoints ? 'point' : 'dist', intervention };
}

// gamma^t * rho, clamped to [0, 1]; the live readout itself echoes the
// server snapshot's value, this is for projecting the decay curve.
export function gateProbability(gamma: number, rho: number, receivedAt: number,
                                iteration: number): number {
  if (iteration < receivedAt) return 0;
  const p = Math.pow(gamma, iteration - receivedAt) * rho;
  return Math.min(Math.max(p, 0), 1);
}

export function formatGateReadout(serverValue: number): string {
  // shown verbatim so the card always matches the snapshot exactly
  return String(serverValue);
}
