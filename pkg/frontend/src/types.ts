/** Shapes returned by the annotation engine's HTTP API. */

export type Verdict = 'match' | 'nomatch' | 'skip';

export interface ImagePanelEntry {
  image_id: number;
  image_path: string | null;
  feature: number[];
}

export interface TrackletPanel {
  tracklet_id: number;
  camera_id: number;
  images: ImagePanelEntry[];
}

export interface PairCard {
  pairId: string;
  pair: [number, number];
  distance: number | null;
  tracklets: [TrackletPanel, TrackletPanel];
}

export interface QueueNextResponse {
  generation: number;
  pair: [number, number] | null;
  pair_id?: string;
  distance?: number | null;
  tracklets?: [TrackletPanel, TrackletPanel];
  pending: number;
}

export interface VerdictResponse {
  generation: number;
  accepted: boolean;
  skipped: boolean;
}

export interface MetricsRow {
  iteration: number;
  tp_manual: number;
  auto_count: number;
  AR: number | null;
  gained_TP_ratio: number | null;
  rank1: number | null;
  rank5: number | null;
  rank10: number | null;
  rank20: number | null;
  mAP: number | null;
}

export interface MetricsResponse {
  generation: number;
  tp_manual: number;
  auto_count: number;
  wasted: number;
  T_pa: number | null;
  AR: number | null;
  gained_TP_ratio: number | null;
  history: MetricsRow[];
}

export interface ClusterEntry {
  cluster_id: number;
  tracklets: number[];
}

export interface ClustersResponse {
  generation: number;
  cluster_count: number;
  clusters: ClusterEntry[];
}
