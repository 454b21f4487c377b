import { describe, expect, it } from "vitest";

import { ApiError, type ServiceClient } from "../src/api.js";
import { AnnotationFlow, type FlowHandlers } from "../src/flow.js";
import { FakeClient, proposalFixture } from "./fakes.js";

function makeFlow(client: FakeClient, overrides: Partial<FlowHandlers> = {}) {
  const events: string[] = [];
  const handlers: FlowHandlers = {
    onProposal: (p) => {
      events.push(`proposal:${p.proposal_id}`);
    },
    onDone: () => {
      events.push("done");
    },
    onStatus: (message, kind) => {
      events.push(`${kind}:${message}`);
    },
    ...overrides,
  };
  const flow = new AnnotationFlow(client as unknown as ServiceClient, "s1", handlers, 5);
  return { flow, events };
}

describe("AnnotationFlow", () => {
  it("walks the queue and signals done", async () => {
    const client = new FakeClient([proposalFixture(0), proposalFixture(1)]);
    const { flow, events } = makeFlow(client);
    await flow.start();
    expect(await flow.decide("positive")).toBe("submitted");
    expect(await flow.decide("negative")).toBe("submitted");
    expect(client.submissions).toEqual([
      { proposalId: "img0:0:1:2", decision: "positive" },
      { proposalId: "img1:0:1:2", decision: "negative" },
    ]);
    expect(events.at(-1)).toBe("done");
  });

  it("ignores decisions while one is in flight (double-click guard)", async () => {
    const client = new FakeClient([proposalFixture(0), proposalFixture(1)]);
    const { flow } = makeFlow(client);
    await flow.start();
    const [first, second] = await Promise.all([
      flow.decide("positive"),
      flow.decide("positive"),
    ]);
    expect([first, second].sort()).toEqual(["ignored", "submitted"]);
    expect(client.submissions).toHaveLength(1);
  });

  it("never submits the same proposal twice even after it settled", async () => {
    const client = new FakeClient([proposalFixture(0)]);
    const { flow } = makeFlow(client);
    await flow.start();
    await flow.decide("positive");
    // queue exhausted; stale extra decision must be ignored
    expect(await flow.decide("positive")).toBe("ignored");
    expect(client.submissions).toHaveLength(1);
  });

  it("retries after a network failure and advances on success", async () => {
    const client = new FakeClient([proposalFixture(0), proposalFixture(1)]);
    client.submitFailures.push(new TypeError("fetch failed"), new TypeError("fetch failed"));
    const { flow, events } = makeFlow(client);
    await flow.start();
    expect(await flow.decide("positive")).toBe("submitted");
    expect(client.submissions).toEqual([{ proposalId: "img0:0:1:2", decision: "positive" }]);
    expect(events.filter((e) => e.startsWith("error:network"))).toHaveLength(2);
    expect(events.at(-1)).toBe("proposal:img1:0:1:2");
  });

  it("does not retry server-side rejections", async () => {
    const client = new FakeClient([proposalFixture(0), proposalFixture(1)]);
    client.submitFailures.push(new ApiError(409, "lease-expired", "gone"));
    const { flow, events } = makeFlow(client);
    await flow.start();
    expect(await flow.decide("positive")).toBe("ignored");
    expect(client.submissions).toHaveLength(0);
    expect(events).toContain("error:lease-expired: gone");
    // the service re-served the proposal; a fresh decision goes through
    expect(flow.currentProposal?.proposal_id).toBe("img0:0:1:2");
    expect(await flow.decide("negative")).toBe("submitted");
    expect(client.submissions).toEqual([{ proposalId: "img0:0:1:2", decision: "negative" }]);
  });
});
