// Typed client for the run-control HTTP API.

export interface HyperparameterDoc {
  name: string;
  type: 'cat' | 'int' | 'float';
  labels?: string[];
  range?: [number, number];
  log?: boolean;
}

export interface SpaceDoc {
  score: string;
  hyperparameters: HyperparameterDoc[];
}

export interface TrialRecord {
  iteration: number;
  config: Record<string, string | number>;
  score: number | null;
  incumbent_score: number | null;
  used_knowledge: boolean;
  refit: boolean;
  failed: boolean;
  sampling_variance: Record<string, number> | null;
}

export interface KnowledgeSummary {
  kind: string;
  names: string[];
  received_at: number;
  gate_probability: number;
}

export interface StatusSnapshot {
  iteration: number;
  max_iterations: number;
  completed: boolean;
  incumbent: { config: Record<string, string | number>; score: number } | null;
  recent_trials: TrialRecord[];
  knowledge: KnowledgeSummary | null;
  gamma: number;
  rho: number;
  refit_iterations: number[];
}

export interface SubmitResult {
  ok: boolean;
  status: number;
  error?: string;
}

export class ApiClient {
  constructor(private readonly base: string) {}

  async status(): Promise<StatusSnapshot> {
    return this.getJson('/status');
  }

  async space(): Promise<SpaceDoc> {
    return this.getJson('/space');
  }

  async trialsFrom(start: number): Promise<TrialRecord[]> {
    const page = await this.getJson(`/trials?from=${start}`);
    return page.trials as TrialRecord[];
  }

  async submitKnowledge(record: object): Promise<SubmitResult> {
    const response = await fetch(`${this.base}/knowledge`, {
      method: 'POST',
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify(record),
    });
    if (response.status === 202) return { ok: true, status: 202 };
    const body = await response.json().catch(() => ({}));
    return { ok: false, status: response.status, error: body.error ?? response.statusText };
  }

  async clearKnowledge(): Promise<SubmitResult> {
    const response = await fetch(`${this.base}/knowledge`, { method: 'DELETE' });
    if (response.status === 202) return { ok: true, status: 202 };
    const body = await response.json().catch(() => ({}));
    return { ok: false, status: response.status, error: body.error ?? response.statusText };
  }

  private async getJson(path: string): Promise<any> {
    const response = await fetch(`${this.base}${path}`);
    if (!response.ok) {
      throw new Error(`${path} failed: ${response.status}`);
    }
    return response.json();
  }
}
