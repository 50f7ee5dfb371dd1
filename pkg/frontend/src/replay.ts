/** Scripted sessions: feed a fixed answer rule through the same flow the
 * buttons use, for end-to-end checks against server-side replays. */

import { SessionClient } from "./api.js";
import { AnswerFlow } from "./flow.js";
import type { Clusters, Relation, ServerState, SessionView } from "./types.js";

export type AnswerRule = (pair: [number, number]) => Relation;

/** Answer the way an oracle reading a label table would. */
export function labelRule(labels: number[]): AnswerRule {
  return ([i, j]) => (labels[i] === labels[j] ? "similar" : "dissimilar");
}

export interface ReplayOutcome {
  sessionId: string;
  answered: number;
  state: ServerState;
  clusters: Clusters;
}

export async function replaySession(
  client: SessionClient,
  config: unknown,
  rule: AnswerRule,
): Promise<ReplayOutcome> {
  const descriptor = await client.create(config);
  const flow = new AnswerFlow(client, descriptor.session_id);
  let view: SessionView = await flow.start();
  let answered = 0;
  while (!view.finished) {
    if (view.pending === null) {
      throw new Error("unfinished view with no pending pair");
    }
    view = await flow.submit(rule(view.pending.pair));
    if (view.contradiction !== null) {
      throw new Error(`scripted answers contradicted: ${view.contradiction}`);
    }
    answered += 1;
  }
  return {
    sessionId: descriptor.session_id,
    answered,
    state: view.state,
    clusters: view.clusters!,
  };
}
