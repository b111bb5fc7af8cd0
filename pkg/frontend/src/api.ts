// Typed client for the elicitation API. The UI never computes densities
// itself: every curve comes from a registered server snapshot.

import type { ModelFile, PriorBlock } from "./model";

export interface CalibrationSplit {
  index: number;
  parent: string[];
  children: string[][];
  base: number[];
  prior: "pc" | "dirichlet";
  origin: (string | number)[];
  case?: number;
  rate?: number;
  median?: number;
  median_deviation?: number;
  concentration?: number;
  observations_used?: number;
}

export interface Calibration {
  name: string;
  n: number;
  likelihood: string;
  total_label: string;
  effects: { name: string; kind: string; size: number; rank: number; scale_factor: number }[];
  splits: CalibrationSplit[];
  total: { kind: string; rate: number | null; upper: number | null; alpha: number | null };
}

export interface Snapshot {
  id: string;
  calibration: Calibration;
}

export interface DensityCurve {
  id: string;
  split: number;
  prior: "pc" | "dirichlet";
  median: number | null;
  omega: number[];
  log_density: number[];
  cdf: number[];
}

export interface QuantileRow {
  "q0.025": number;
  "q0.25": number;
  "q0.5": number;
  "q0.75": number;
  "q0.975": number;
  mean: number;
  share_at_base?: number;
}

export interface Marginals {
  n_draws: number;
  total_label: string;
  leaf_shares: Record<string, QuantileRow>;
  split_weights: Record<string, (QuantileRow & { child: string[] })[]>;
}

export interface ApiError {
  status: number;
  error: string;
  message: string;
}

export class ElicitClient {
  constructor(private baseUrl: string = "") {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const resp = await fetch(this.baseUrl + path, init);
    if (!resp.ok) {
      let body: any = {};
      try {
        body = await resp.json();
      } catch {
        // non-JSON error body; keep defaults
      }
      const err: ApiError = {
        status: resp.status,
        error: body.error ?? "HttpError",
        message: body.message ?? resp.statusText,
      };
      throw err;
    }
    return resp.json() as Promise<T>;
  }

  createModel(model: ModelFile): Promise<Snapshot> {
    return this.request("/api/models", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(model),
    });
  }

  getModel(id: string): Promise<{ id: string; model_file: ModelFile; calibration: Calibration }> {
    return this.request(`/api/models/${id}`);
  }

  getDensity(id: string, split: number, points?: number): Promise<DensityCurve> {
    const q = points ? `?points=${points}` : "";
    return this.request(`/api/models/${id}/splits/${split}/density${q}`);
  }

  updatePrior(
    id: string,
    split: number,
    prior: PriorBlock & { base?: number[] },
  ): Promise<Snapshot> {
    return this.request(`/api/models/${id}/splits/${split}/prior`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(prior),
    });
  }

  getMarginals(id: string, n = 20000, seed = 0): Promise<Marginals> {
    return this.request(`/api/models/${id}/marginals?n=${n}&seed=${seed}`);
  }
}
