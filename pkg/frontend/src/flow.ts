/**
 * Decision flow state machine: one proposal on screen at a time.
 *
 * Guarantees exactly one submission per proposal_id (rapid double clicks
 * and key repeats are ignored while a submission is pending or after one
 * succeeded) and retains decisions locally when the network fails,
 * retrying until the service acknowledges before advancing.
 */

import { ApiError, ServiceClient } from "./api.js";
import type { Decision, ProposalPayload } from "./api.js";

export interface FlowProgress {
  /** decisions acknowledged this session */
  done: number;
  /** undecided proposals left for this predicate, per the service */
  remaining: number;
}

export interface FlowHandlers {
  /** Render a proposal; buttons must stay inactive until this resolves. */
  onProposal(proposal: ProposalPayload, progress: FlowProgress): Promise<void> | void;
  /** Queue exhausted: show the end-of-campaign screen. */
  onDone(): Promise<void> | void;
  /** Transient status line (retries, server rejections). */
  onStatus(message: string, kind: "info" | "error"): void;
}

const sleep = (ms: number) => new Promise<void>((resolve) => setTimeout(resolve, ms));

export class AnnotationFlow {
  private current: ProposalPayload | null = null;
  private submitted = new Set<string>();
  private busy = false;
  private doneCount = 0;

  constructor(
    private readonly client: ServiceClient,
    private readonly sessionId: string,
    private readonly handlers: FlowHandlers,
    private readonly retryDelayMs: number = 1500,
  ) {}

  get currentProposal(): ProposalPayload | null {
    return this.current;
  }

  get progress(): FlowProgress {
    return { done: this.doneCount, remaining: this.current?.remaining ?? 0 };
  }

  async start(): Promise<void> {
    await this.loadNext();
  }

  /**
   * Submit a decision for the proposal on screen.  Returns "submitted"
   * once the service acknowledged, or "ignored" when there is nothing to
   * decide or the proposal is already being (or has been) submitted.
   */
  async decide(decision: Decision): Promise<"submitted" | "ignored"> {
    const proposal = this.current;
    if (proposal === null || this.busy || this.submitted.has(proposal.proposal_id)) {
      return "ignored";
    }
    this.busy = true;
    let acknowledged: boolean;
    try {
      acknowledged = await this.submitWithRetry(proposal.proposal_id, decision);
      if (acknowledged) {
        // guard future duplicates only once the service accepted; a
        // rejected submission may legitimately be re-served to us later
        this.submitted.add(proposal.proposal_id);
        this.doneCount += 1;
      }
    } finally {
      this.busy = false;
    }
    await this.loadNext();
    return acknowledged ? "submitted" : "ignored";
  }

  private async submitWithRetry(proposalId: string, decision: Decision): Promise<boolean> {
    for (let attempt = 1; ; attempt++) {
      try {
        await this.client.submitDecision(this.sessionId, proposalId, decision);
        return true;
      } catch (error) {
        if (error instanceof ApiError) {
          // the server made a call (lease expired, duplicate, conflict):
          // nothing to retry, surface it and fetch a fresh proposal
          this.handlers.onStatus(`${error.category}: ${error.message}`, "error");
          return false;
        }
        this.handlers.onStatus(
          `network error, retrying (attempt ${attempt})`,
          "error",
        );
        await sleep(this.retryDelayMs);
      }
    }
  }

  private async loadNext(): Promise<void> {
    let proposal: ProposalPayload | null;
    for (let attempt = 1; ; attempt++) {
      try {
        proposal = await this.client.nextProposal(this.sessionId);
        break;
      } catch (error) {
        if (error instanceof ApiError) {
          this.handlers.onStatus(`${error.category}: ${error.message}`, "error");
          proposal = null;
          break;
        }
        this.handlers.onStatus(`network error, retrying (attempt ${attempt})`, "error");
        await sleep(this.retryDelayMs);
      }
    }
    this.current = proposal;
    if (proposal === null) {
      await this.handlers.onDone();
      return;
    }
    await this.handlers.onProposal(proposal, this.progress);
  }
}
