import { describe, expect, it } from "vitest";

import { BudgetSpentError, ContradictionError, SessionClient } from "../src/api.js";
import { AnswerFlow } from "../src/flow.js";
import { displayedCounts } from "../src/state.js";
import { neighborhoodPanel, page } from "../src/render.js";
import type {
  AnswerResult,
  Clusters,
  NextQuery,
  ServerState,
} from "../src/types.js";

function serverState(over: Partial<ServerState> = {}): ServerState {
  return {
    neighborhoods: [[0]],
    constraints: { similar: 0, dissimilar: 0 },
    budget: { spent: 0, total: 4 },
    loops: 0,
    exhausted: false,
    done: false,
    feature_names: ["x1", "x2"],
    feature_weights: [1.2, 0.8],
    embedding: { features: [0, 1], coordinates: [[0, 0], [1, 1], [2, 0]] },
    ...over,
  };
}

function query(pair: [number, number], spent: number, probed: number | null = 0): NextQuery {
  return {
    pair,
    target: pair[1],
    neighborhood_probed: probed,
    progress: { spent, budget: 4, loops: 0, neighborhoods: 1 },
  };
}

function accepted(spent: number): AnswerResult {
  return {
    accepted: true,
    implied_constraints: 0,
    new_neighborhood: null,
    loop_completed: false,
    progress: { spent, budget: 4, loops: 0, neighborhoods: 1 },
  };
}

const CLUSTERS: Clusters = { labels: [1, 2, 1], n_clusters: 2, sizes: [2, 1], finalized: true };

/** Queue-driven stand-in for the HTTP client. */
class Stub {
  log: string[] = [];
  states: ServerState[] = [];
  nexts: Array<NextQuery | Error> = [];
  answerQueue: Array<AnswerResult | Error | "hang"> = [];
  clustersValue: Clusters = CLUSTERS;

  async state(): Promise<ServerState> {
    this.log.push("state");
    const value = this.states.shift();
    if (value === undefined) {
      throw new Error("stub ran out of states");
    }
    return value;
  }

  async next(): Promise<NextQuery> {
    this.log.push("next");
    const value = this.nexts.shift();
    if (value === undefined) {
      throw new Error("stub ran out of queries");
    }
    if (value instanceof Error) {
      throw value;
    }
    return value;
  }

  async answer(): Promise<AnswerResult> {
    this.log.push("answer");
    const value = this.answerQueue.shift();
    if (value === undefined) {
      throw new Error("stub ran out of answers");
    }
    if (value === "hang") {
      return new Promise<AnswerResult>(() => {});
    }
    if (value instanceof Error) {
      throw value;
    }
    return value;
  }

  async clusters(): Promise<Clusters> {
    this.log.push("clusters");
    return this.clustersValue;
  }

  asClient(): SessionClient {
    return this as unknown as SessionClient;
  }
}

describe("answer flow", () => {
  it("builds the opening view from the server alone", async () => {
    const stub = new Stub();
    stub.states = [serverState()];
    stub.nexts = [query([0, 1], 0)];
    const flow = new AnswerFlow(stub.asClient(), "s1");
    const view = await flow.start();
    expect(view.pending?.pair).toEqual([0, 1]);
    expect(displayedCounts(view)).toEqual({
      spent: 0, budget: 4, similar: 0, dissimilar: 0, neighborhoods: 1, loops: 0,
    });
    expect(stub.log).toEqual(["state", "next"]);
  });

  it("shows the first neighborhood grown by one after a similar answer", async () => {
    const stub = new Stub();
    stub.states = [
      serverState(),
      serverState({
        neighborhoods: [[0, 1]],
        constraints: { similar: 1, dissimilar: 0 },
        budget: { spent: 1, total: 4 },
      }),
    ];
    stub.nexts = [query([0, 1], 0), query([0, 2], 1)];
    stub.answerQueue = [accepted(1)];
    const flow = new AnswerFlow(stub.asClient(), "s1");
    await flow.start();
    const view = await flow.submit("similar");
    expect(displayedCounts(view).similar).toBe(1);
    expect(view.state.neighborhoods).toEqual([[0, 1]]);
    expect(neighborhoodPanel(view.state.neighborhoods)).toContain("N1: 2 instances");
    expect(view.pending?.pair).toEqual([0, 2]);
  });

  it("keeps the pair and raises a banner on a contradiction", async () => {
    const stub = new Stub();
    stub.states = [serverState({ budget: { spent: 2, total: 4 } })];
    stub.nexts = [query([0, 3], 2)];
    stub.answerQueue = [
      new ContradictionError(409, "pair (0, 3) answered similar but closure forces dissimilar"),
    ];
    const flow = new AnswerFlow(stub.asClient(), "s1");
    await flow.start();
    const view = await flow.submit("similar");
    expect(view.contradiction).toContain("closure forces dissimilar");
    expect(view.pending?.pair).toEqual([0, 3]);
    // State was not refetched: the server promised it did not change.
    expect(stub.log).toEqual(["state", "next", "answer"]);
  });

  it("clears the banner once a corrected answer goes through", async () => {
    const stub = new Stub();
    stub.states = [
      serverState({ budget: { spent: 2, total: 4 } }),
      serverState({ budget: { spent: 3, total: 4 } }),
    ];
    stub.nexts = [query([0, 3], 2), query([1, 3], 3)];
    stub.answerQueue = [new ContradictionError(409, "conflict"), accepted(3)];
    const flow = new AnswerFlow(stub.asClient(), "s1");
    await flow.start();
    await flow.submit("similar");
    const view = await flow.submit("dissimilar");
    expect(view.contradiction).toBeNull();
    expect(view.pending?.pair).toEqual([1, 3]);
  });

  it("finishes through state and clusters when the budget runs out", async () => {
    const stub = new Stub();
    const terminal = serverState({
      budget: { spent: 4, total: 4 },
      exhausted: true,
      neighborhoods: [[0, 1], [2]],
    });
    stub.states = [serverState({ budget: { spent: 3, total: 4 } }), terminal, terminal];
    stub.nexts = [query([0, 2], 3), new BudgetSpentError(410, "the query budget is spent")];
    stub.answerQueue = [accepted(4)];
    const flow = new AnswerFlow(stub.asClient(), "s1");
    await flow.start();
    const view = await flow.submit("dissimilar");
    expect(view.finished).toBe(true);
    expect(view.pending).toBeNull();
    expect(view.clusters).toEqual(CLUSTERS);
    expect(displayedCounts(view).spent).toBe(4);
  });

  it("finishes when the answer itself reports a spent budget", async () => {
    const stub = new Stub();
    const terminal = serverState({ budget: { spent: 4, total: 4 }, exhausted: true });
    stub.states = [terminal, terminal];
    stub.nexts = [query([0, 2], 4)];
    stub.answerQueue = [new BudgetSpentError(410, "the query budget is spent")];
    const flow = new AnswerFlow(stub.asClient(), "s1");
    await flow.start();
    const view = await flow.submit("similar");
    expect(view.finished).toBe(true);
    expect(view.clusters).not.toBeNull();
  });

  it("refuses overlapping requests", async () => {
    const stub = new Stub();
    stub.states = [serverState()];
    stub.nexts = [query([0, 1], 0)];
    stub.answerQueue = ["hang"];
    const flow = new AnswerFlow(stub.asClient(), "s1");
    await flow.start();
    void flow.submit("similar").catch(() => {});
    await expect(flow.submit("dissimilar")).rejects.toThrow("already in flight");
  });

  it("renders identically when resumed from the same server state", async () => {
    const snapshot = serverState({
      neighborhoods: [[0, 1], [2]],
      constraints: { similar: 1, dissimilar: 2 },
      budget: { spent: 3, total: 4 },
      loops: 1,
    });
    const pending = query([1, 2], 3, 1);
    const first = new Stub();
    first.states = [structuredClone(snapshot)];
    first.nexts = [structuredClone(pending)];
    const flowA = new AnswerFlow(first.asClient(), "s1");
    const second = new Stub();
    second.states = [structuredClone(snapshot)];
    second.nexts = [structuredClone(pending)];
    const flowB = new AnswerFlow(second.asClient(), "s1");
    const viewA = await flowA.start();
    const viewB = await flowB.start();
    expect(page(viewA, null)).toBe(page(viewB, null));
  });
});
