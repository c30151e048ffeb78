// Page wiring: poll the run, render charts/table/cards, submit beliefs.

import { ApiClient, SpaceDoc, StatusSnapshot, TrialRecord } from './api.js';
import { drawChart, incumbentSeries, knowledgeTrials, scoreSeries,
         varianceSeries } from './charts.js';
import { HyperparameterForm, availableModes, buildInteraction, defaultForm,
         formatGateReadout, gateProbability, validateForms } from './model.js';

const params = new URLSearchParams(window.location.search);
const API_BASE = params.get('api') ?? window.location.origin;
const POLL_MS = 1000;

const api = new ApiClient(API_BASE);
const el = (id: string) => document.getElementById(id)!;

let space: SpaceDoc | null = null;
let forms: HyperparameterForm[] = [];
let trials: TrialRecord[] = [];
let pollDelay = POLL_MS;
let completedNoticeShown = false;

async function init(): Promise<void> {
  el('api-base').textContent = API_BASE;
  try {
    space = await api.space();
    buildForm(space);
  } catch (err) {
    showBanner(`cannot reach ${API_BASE}: ${err}`);
  }
  void poll();
}

async function poll(): Promise<void> {
  try {
    const status = await api.status();
    const fresh = await api.trialsFrom(trials.length);
    trials = trials.concat(fresh);
    hideBanner();
    pollDelay = POLL_MS;
    render(status);
  } catch (err) {
    showBanner(`stale data, retrying: ${err}`);
    pollDelay = Math.min(pollDelay * 2, 10_000);
  }
  window.setTimeout(() => void poll(), pollDelay);
}

function showBanner(message: string): void {
  const banner = el('banner');
  banner.textContent = message;
  banner.style.display = 'block';
}

function hideBanner(): void {
  el('banner').style.display = 'none';
}

function render(status: StatusSnapshot): void {
  el('iteration').textContent = `${status.iteration} / ${status.max_iterations}`;
  if (status.incumbent) {
    el('incumbent-score').textContent = status.incumbent.score.toPrecision(6);
    el('incumbent-config').textContent = JSON.stringify(status.incumbent.config);
  } else {
    el('incumbent-score').textContent = '–';
    el('incumbent-config').textContent = 'no successful trials yet';
  }

  renderKnowledge(status);
  renderCharts(status);
  renderTable();

  if (status.completed && !completedNoticeShown) {
    completedNoticeShown = true;
    el('completed-notice').style.display = 'block';
    (el('submit-button') as HTMLButtonElement).disabled = true;
    (el('clear-button') as HTMLButtonElement).disabled = true;
  }
}

function renderKnowledge(status: StatusSnapshot): void {
  const card = el('knowledge-card');
  if (!status.knowledge) {
    card.innerHTML = '<em>no active belief</em>';
    return;
  }
  const k = status.knowledge;
  // the readout mirrors the server snapshot's gamma^t * rho exactly
  const readout = formatGateReadout(k.gate_probability);
  const horizon = Math.min(status.iteration + 30, status.max_iterations);
  const projected = gateProbability(status.gamma, status.rho, k.received_at, horizon);
  card.innerHTML =
    `<b>${k.kind}</b> over ${k.names.join(', ')} (since iteration ${k.received_at})` +
    `<br>gate probability <code id="gate-readout">${readout}</code>` +
    `<br><small>projected at iteration ${horizon}: ${projected.toPrecision(3)}</small>`;
}

function renderCharts(status: StatusSnapshot): void {
  const markers = trials
    .filter((t) => t.used_knowledge)
    .map((t) => t.iteration);
  const inc = incumbentSeries(trials);
  const sc = scoreSeries(trials);
  const used = knowledgeTrials(trials);
  drawChart(el('chart-incumbent') as HTMLCanvasElement, [
    { ...sc, color: '#bbd', dots: true },
    { ...used, color: '#e8842c', dots: true, label: 'used knowledge' },
    { ...inc, color: '#2c6e8a', step: true },
  ], { markers: status.refit_iterations });

  const variance = varianceSeries(trials);
  const names = Object.keys(variance).sort();
  const palette = ['#2c6e8a', '#8a2c6e', '#6e8a2c', '#e8842c', '#555'];
  drawChart(el('chart-variance') as HTMLCanvasElement,
            names.map((name, i) => ({ ...variance[name], color: palette[i % palette.length] })),
            { yZero: true });
  el('variance-legend').textContent = names
    .map((n, i) => `${n} (${['blue', 'purple', 'olive', 'orange', 'grey'][i % 5]})`)
    .join('  ·  ');
  void markers;
}

function renderTable(): void {
  const body = el('trial-rows');
  const recent = trials.slice(-40).reverse();
  body.innerHTML = recent.map((t) => {
    const badge = t.used_knowledge ? ' <span class="badge">knowledge</span>' : '';
    const refit = t.refit ? ' <span class="badge refit">refit</span>' : '';
    const score = t.failed ? 'failed' : t.score?.toPrecision(5) ?? '–';
    return `<tr><td>${t.iteration}${badge}${refit}</td><td>${score}</td>` +
           `<td>${t.incumbent_score?.toPrecision(5) ?? '–'}</td>` +
           `<td class="config">${JSON.stringify(t.config)}</td></tr>`;
  }).join('');
  el('chart-count').textContent = String(trials.length);
}

// -- prior builder -----------------------------------------------------------

function buildForm(doc: SpaceDoc): void {
  forms = doc.hyperparameters.map(defaultForm);
  const host = el('prior-form');
  host.innerHTML = '';
  doc.hyperparameters.forEach((hp, index) => {
    const row = document.createElement('div');
    row.className = 'form-row';
    const modes = availableModes(hp);
    const domain = hp.type === 'cat'
      ? (hp.labels ?? []).join(', ')
      : `[${hp.range?.[0]}, ${hp.range?.[1]}]${hp.log ? ' log' : ''}`;
    row.innerHTML =
      `<label><b>${hp.name}</b> <small>${hp.type}: ${domain}</small></label>` +
      `<select data-index="${index}">` +
      modes.map((m) => `<option value="${m}">${m}</option>`).join('') +
      '</select><span class="controls"></span><span class="field-error"></span>';
    host.appendChild(row);
    row.querySelector('select')!.addEventListener('change', (event) => {
      forms[index].mode = (event.target as HTMLSelectElement).value as any;
      renderControls(row, hp, index);
    });
    renderControls(row, hp, index);
  });
}

function renderControls(row: HTMLElement, hp: SpaceDoc['hyperparameters'][number],
                        index: number): void {
  const slot = row.querySelector('.controls') as HTMLElement;
  const form = forms[index];
  slot.innerHTML = '';
  const input = (value: string, key: 'point' | 'lo' | 'hi' | 'mu' | 'sigma',
                 label: string) => {
    const wrap = document.createElement('label');
    wrap.className = 'inline';
    wrap.textContent = label;
    const box = document.createElement('input');
    box.value = value;
    box.size = 8;
    box.addEventListener('input', () => { form[key] = box.value; });
    wrap.appendChild(box);
    slot.appendChild(wrap);
  };
  if (form.mode === 'point') {
    if (hp.type === 'cat') {
      const select = document.createElement('select');
      select.innerHTML = (hp.labels ?? [])
        .map((l) => `<option${l === form.point ? ' selected' : ''}>${l}</option>`)
        .join('');
      select.addEventListener('change', () => { form.point = select.value; });
      slot.appendChild(select);
    } else {
      input(form.point, 'point', 'value ');
    }
  } else if (form.mode === 'uniform') {
    input(form.lo, 'lo', 'lo ');
    input(form.hi, 'hi', 'hi ');
  } else if (form.mode === 'normal') {
    input(form.mu, 'mu', 'μ ');
    input(form.sigma, 'sigma', 'σ ');
  } else if (form.mode === 'weights') {
    (hp.labels ?? []).forEach((label, j) => {
      const wrap = document.createElement('label');
      wrap.className = 'inline';
      wrap.textContent = label;
      const slider = document.createElement('input');
      slider.type = 'range';
      slider.min = '0';
      slider.max = '100';
      slider.value = String(form.weights[j]);
      slider.addEventListener('input', () => {
        form.weights[j] = Number(slider.value);
      });
      wrap.appendChild(slider);
      slot.appendChild(wrap);
    });
  }
}

async function submit(): Promise<void> {
  if (!space) return;
  const note = el('submit-note');
  const { errors } = validateForms(space, forms);
  renderFieldErrors(errors);
  if (Object.keys(errors).length > 0) {
    note.textContent = errors['*'] ?? 'fix the highlighted fields';
    return;
  }
  const record = buildInteraction(space, forms)!;
  const result = await api.submitKnowledge(record);
  if (result.ok) {
    note.textContent = 'accepted — active next iteration';
  } else {
    note.textContent = `rejected (${result.status}): ${result.error}`;
  }
}

function renderFieldErrors(errors: Record<string, string>): void {
  document.querySelectorAll('.form-row').forEach((row, index) => {
    const slot = row.querySelector('.field-error') as HTMLElement;
    slot.textContent = errors[forms[index].name] ?? '';
  });
}

async function clearKnowledge(): Promise<void> {
  const result = await api.clearKnowledge();
  el('submit-note').textContent = result.ok
    ? 'belief cleared'
    : `clear failed (${result.status}): ${result.error}`;
}

el('submit-button').addEventListener('click', () => void submit());
el('clear-button').addEventListener('click', () => void clearKnowledge());
void init();
