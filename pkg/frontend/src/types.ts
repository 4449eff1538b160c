/** Shapes of the service API's JSON responses. The UI holds no estimation
 * logic: every number shown comes from these payloads verbatim. */

export type QueryKind = 'precision-sample' | 'recall-pool';

export interface QueryProgress {
  precision_answered: number;
  precision_total: number;
  pools_answered: number;
  positives: number;
  target_positives: number;
}

export interface QueryPayload {
  id: string;
  kind: QueryKind;
  gamma: number;
  pool_size: number;
  progress: QueryProgress;
  image_png_b64: string;
}

export interface EstimateRecord {
  gamma: number;
  n_detections: number;
  k: number;
  fp_hat: number;
  p_hat: number | null;
  t_pools: number;
  positives: number;
  beta_hat: number | null;
  fn_hat: number;
  recall_hat: number | null;
  flags: string[];
}

export interface GammaProgress {
  gamma: number;
  complete: boolean;
  precision_answered: number;
  precision_total: number;
  pools_answered: number;
}

export interface EstimatesResponse {
  records: EstimateRecord[];
  progress: GammaProgress[];
  complete: boolean;
}

export interface SessionCreated {
  id: string;
  gammas: number[];
}

export interface SessionSummary {
  id: string;
  created: number;
  complete: boolean;
}
