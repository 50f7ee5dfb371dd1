/** The answer loop: next, judge, refresh, repeat until the budget is gone.
 *
 * One request in flight at a time; submissions while busy are refused. The
 * same flow drives both the buttons and scripted replays.
 */

import { BudgetSpentError, ContradictionError, SessionClient } from "./api.js";
import * as model from "./state.js";
import type { Relation, SessionView } from "./types.js";

export class AnswerFlow {
  private view_: SessionView | null = null;
  private busy = false;

  constructor(
    private readonly client: SessionClient,
    readonly sessionId: string,
  ) {}

  get view(): SessionView {
    if (this.view_ === null) {
      throw new Error("flow not started");
    }
    return this.view_;
  }

  /** Build the view from the server alone. Also how a reload resumes. */
  async start(): Promise<SessionView> {
    return this.exclusive(async () => {
      const state = await this.client.state(this.sessionId);
      this.view_ = model.freshView(this.sessionId, state);
      return this.advance();
    });
  }

  /** Record one judgment for the pending pair. */
  async submit(relation: Relation): Promise<SessionView> {
    return this.exclusive(async () => {
      const pending = this.view.pending;
      if (pending === null) {
        throw new Error("no pair is awaiting judgment");
      }
      try {
        await this.client.answer(
          this.sessionId, pending.pair, relation, pending.progress.spent);
      } catch (error) {
        if (error instanceof ContradictionError) {
          // Server state is untouched; the same pair stays on screen.
          this.view_ = model.withContradiction(this.view, error.message);
          return this.view;
        }
        if (error instanceof BudgetSpentError) {
          return this.finish();
        }
        throw error;
      }
      const state = await this.client.state(this.sessionId);
      this.view_ = model.withState(this.view, state);
      return this.advance();
    });
  }

  private async advance(): Promise<SessionView> {
    try {
      const pending = await this.client.next(this.sessionId);
      this.view_ = model.withPending(this.view, pending);
    } catch (error) {
      if (error instanceof BudgetSpentError) {
        return this.finish();
      }
      throw error;
    }
    return this.view;
  }

  private async finish(): Promise<SessionView> {
    // Clusters first: that call finalizes the session server-side, so the
    // state read afterwards already shows the aggregated final weights.
    const clusters = await this.client.clusters(this.sessionId);
    const state = await this.client.state(this.sessionId);
    this.view_ = model.finished(this.view, state, clusters);
    return this.view;
  }

  private async exclusive<T>(work: () => Promise<T>): Promise<T> {
    if (this.busy) {
      throw new Error("a request is already in flight");
    }
    this.busy = true;
    try {
      return await work();
    } finally {
      this.busy = false;
    }
  }
}
