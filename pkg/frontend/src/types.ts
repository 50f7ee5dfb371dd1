/** Server payload shapes, verbatim from the session service. */

export type Relation = "similar" | "dissimilar";

export interface SessionDescriptor {
  session_id: string;
  n: number;
  p: number;
  budget: number;
  strategy: string;
}

export interface Progress {
  spent: number;
  budget: number;
  loops: number;
  neighborhoods: number;
}

export interface NextQuery {
  pair: [number, number];
  target: number;
  neighborhood_probed: number | null;
  progress: Progress;
}

export interface AnswerResult {
  accepted: boolean;
  implied_constraints: number;
  new_neighborhood: number | null;
  loop_completed: boolean;
  progress: Progress;
}

export interface Embedding {
  features: [number, number];
  coordinates: [number, number][];
}

export interface ServerState {
  neighborhoods: number[][];
  constraints: { similar: number; dissimilar: number };
  budget: { spent: number; total: number };
  loops: number;
  exhausted: boolean;
  done: boolean;
  feature_names: string[];
  feature_weights: number[];
  embedding: Embedding;
}

export interface Clusters {
  labels: number[];
  n_clusters: number;
  sizes: number[];
  finalized: boolean;
}

/** Everything the page renders. Mirrors acknowledged server state only. */
export interface SessionView {
  sessionId: string;
  state: ServerState;
  /** Pair awaiting judgment; null once the budget is spent or nothing is left. */
  pending: NextQuery | null;
  clusters: Clusters | null;
  /** Server explanation of the last rejected answer, if any. */
  contradiction: string | null;
  finished: boolean;
}
