/** View-model construction. Every field comes from an acknowledged server
 * payload; nothing here anticipates what the server will say. */

import type { Clusters, NextQuery, ServerState, SessionView } from "./types.js";

export function freshView(sessionId: string, state: ServerState): SessionView {
  return {
    sessionId,
    state,
    pending: null,
    clusters: null,
    contradiction: null,
    finished: false,
  };
}

export function withPending(view: SessionView, pending: NextQuery): SessionView {
  return { ...view, pending, contradiction: null };
}

export function withState(view: SessionView, state: ServerState): SessionView {
  return { ...view, state };
}

export function withContradiction(view: SessionView, detail: string): SessionView {
  return { ...view, contradiction: detail };
}

export function finished(view: SessionView, state: ServerState, clusters: Clusters): SessionView {
  return {
    ...view,
    state,
    clusters,
    pending: null,
    contradiction: null,
    finished: true,
  };
}

/** The counts the page prints, straight off the server state. */
export function displayedCounts(view: SessionView): {
  spent: number;
  budget: number;
  similar: number;
  dissimilar: number;
  neighborhoods: number;
  loops: number;
} {
  const { state } = view;
  return {
    spent: state.budget.spent,
    budget: state.budget.total,
    similar: state.constraints.similar,
    dissimilar: state.constraints.dissimilar,
    neighborhoods: state.neighborhoods.length,
    loops: state.loops,
  };
}
