/**
 * Typed client for the annotation service JSON API.
 *
 * All truth lives in the service; this module only moves JSON. Network
 * failures reject with the original error so callers can queue retries;
 * HTTP errors reject with ApiError carrying the server's error category.
 */

export type Decision =
  | "positive"
  | "negative"
  | "no_relation"
  | "skip"
  | "faulty_subject"
  | "faulty_object";

/** Uncompressed row-major RLE: counts of 0s/1s alternating, starting with 0s. */
export interface RleMask {
  size: [number, number];
  counts: number[];
}

export interface MaskedObject {
  object_idx: number;
  category: string;
  mask: RleMask | null;
}

export interface ProposalPayload {
  proposal_id: string;
  image_id: string;
  image_url: string;
  width: number;
  height: number;
  predicate_id: number;
  display_name: string;
  subject: MaskedObject;
  object: MaskedObject;
  remaining: number;
}

export interface SessionInfo {
  session_id: string;
  predicate_id: number;
  display_name: string;
}

export interface PredicateInfo {
  predicate_id: number;
  name: string;
  display_name: string;
  queue_depth: number;
  terminal: number;
  positive_ratio: number | null;
}

export interface DecisionAck {
  status: string;
  conflict: boolean;
}

export class ApiError extends Error {
  constructor(
    public readonly status: number,
    public readonly category: string,
    message: string,
  ) {
    super(message);
  }
}

async function parseError(response: Response): Promise<ApiError> {
  let category = "http-error";
  let message = `HTTP ${response.status}`;
  try {
    const body = await response.json();
    if (body && body.detail) {
      category = body.detail.category ?? category;
      message = body.detail.message ?? message;
    }
  } catch {
    // non-JSON error body; keep defaults
  }
  return new ApiError(response.status, category, message);
}

async function request<T>(url: string, init?: RequestInit): Promise<T> {
  const response = await fetch(url, init);
  if (!response.ok) {
    throw await parseError(response);
  }
  return (await response.json()) as T;
}

export class ServiceClient {
  constructor(private readonly base: string = "") {}

  openSession(annotatorId: string, predicateId: number): Promise<SessionInfo> {
    return request(`${this.base}/api/sessions`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ annotator_id: annotatorId, predicate_id: predicateId }),
    });
  }

  async nextProposal(sessionId: string): Promise<ProposalPayload | null> {
    const data = await request<{ proposal: ProposalPayload | null }>(
      `${this.base}/api/next?session_id=${encodeURIComponent(sessionId)}`,
    );
    return data.proposal;
  }

  submitDecision(
    sessionId: string,
    proposalId: string,
    decision: Decision,
  ): Promise<DecisionAck> {
    return request(`${this.base}/api/decisions`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({
        session_id: sessionId,
        proposal_id: proposalId,
        decision,
      }),
    });
  }

  async predicates(): Promise<PredicateInfo[]> {
    const data = await request<{ predicates: PredicateInfo[] }>(
      `${this.base}/api/predicates`,
    );
    return data.predicates;
  }

  stats(): Promise<Record<string, unknown>> {
    return request(`${this.base}/api/stats`);
  }
}
