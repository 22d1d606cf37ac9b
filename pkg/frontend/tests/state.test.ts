import assert from "node:assert/strict";
import { test } from "node:test";

import type { PendingBatch, SessionEnvelope, SessionStatus } from "../src/api.js";
import {
  initialState,
  judgmentsPayload,
  readyToSubmit,
  reduce,
  type UiState,
} from "../src/state.js";

function batch(indices: number[], kind: "initial" | "query" = "query"): PendingBatch {
  return {
    kind,
    size: indices.length,
    remaining_budget: 10,
    instances: indices.map((index) => ({
      index,
      features: { datetime: 0, latitude: 0, longitude: 0, pressure: 1, temperature: 2, salinity: 3 },
      units: {},
      selection_score: 0.5,
      model_p1: 0.4,
      model_entropy: 0.67,
      context: [],
    })),
  };
}

function status(overrides: Partial<SessionStatus> = {}): SessionStatus {
  return {
    session_id: "s1",
    dataset_id: "d1",
    phase: "awaiting_labels",
    revision: 1,
    initial_labeling: "trusted",
    n_initial: 5,
    n_queried: 0,
    budget: 10,
    labels_spent: 5,
    confidence_tau: 0.05,
    max_entropy: 0.4,
    class_balance: { good: 4, bad: 1 },
    curve: [{ cycle: 0, labels_spent: 5, f1: 0.5 }],
    f1_available: true,
    stop_reason: null,
    ...overrides,
  };
}

function envelope(overrides: Partial<SessionEnvelope> = {}): SessionEnvelope {
  return {
    session_id: "s1",
    phase: "awaiting_labels",
    revision: 1,
    pending: batch([3, 7]),
    ...overrides,
  };
}

function labeling(): UiState {
  return reduce(initialState("s1"), { type: "envelope", envelope: envelope() });
}

test("envelope with a pending batch enters labeling", () => {
  const state = labeling();
  assert.equal(state.kind, "labeling");
  if (state.kind === "labeling") {
    assert.equal(state.revision, 1);
    assert.deepEqual(state.judgments, {});
  }
});

test("judging all cards enables submit, partial does not", () => {
  let state = labeling();
  assert.equal(readyToSubmit(state), false);
  state = reduce(state, { type: "judge", index: 3, label: 0 });
  assert.equal(readyToSubmit(state), false);
  state = reduce(state, { type: "judge", index: 7, label: 1 });
  assert.equal(readyToSubmit(state), true);
  if (state.kind === "labeling") {
    assert.deepEqual(judgmentsPayload(state), { "3": 0, "7": 1 });
  }
});

test("judging an index outside the batch is ignored", () => {
  const state = reduce(labeling(), { type: "judge", index: 99, label: 1 });
  if (state.kind === "labeling") {
    assert.deepEqual(state.judgments, {});
  } else {
    assert.fail("expected labeling state");
  }
});

test("no judgments accepted while a submission is in flight", () => {
  let state = labeling();
  state = reduce(state, { type: "judge", index: 3, label: 0 });
  state = reduce(state, { type: "judge", index: 7, label: 0 });
  state = reduce(state, { type: "submit_started" });
  const after = reduce(state, { type: "judge", index: 3, label: 1 });
  assert.deepEqual(after, state);
  assert.equal(readyToSubmit(after), false);
});

test("successful submit replaces state from the response (no optimism)", () => {
  let state = labeling();
  state = reduce(state, { type: "judge", index: 3, label: 0 });
  state = reduce(state, { type: "judge", index: 7, label: 0 });
  state = reduce(state, { type: "submit_started" });
  const next = envelope({ revision: 2, pending: batch([11]) , status: status({ revision: 2 })});
  state = reduce(state, { type: "envelope", envelope: next });
  assert.equal(state.kind, "labeling");
  if (state.kind === "labeling") {
    assert.equal(state.revision, 2);
    assert.deepEqual(state.judgments, {});
    assert.deepEqual(
      state.batch.instances.map((i) => i.index),
      [11],
    );
  }
});

test("stale revision conflict locks the tab read-only", () => {
  let state = labeling();
  state = reduce(state, {
    type: "submit_failed",
    httpStatus: 409,
    error: { code: "stale_revision", message: "advanced elsewhere", details: {} },
  });
  assert.equal(state.kind, "stale_locked");
  // further envelopes keep it locked
  const still = reduce(state, { type: "envelope", envelope: envelope({ revision: 5 }) });
  assert.equal(still.kind, "stale_locked");
});

test("status with a newer revision also locks a labeling tab", () => {
  const state = reduce(labeling(), {
    type: "status",
    status: status({ revision: 4 }),
  });
  assert.equal(state.kind, "stale_locked");
});

test("422 keeps judgments so the human can correct the batch", () => {
  let state = labeling();
  state = reduce(state, { type: "judge", index: 3, label: 1 });
  state = reduce(state, { type: "judge", index: 7, label: 1 });
  state = reduce(state, { type: "submit_started" });
  state = reduce(state, {
    type: "submit_failed",
    httpStatus: 422,
    error: { code: "label_submission", message: "bad", details: {} },
  });
  assert.equal(state.kind, "labeling");
  if (state.kind === "labeling") {
    assert.equal(state.submitting, false);
    assert.deepEqual(state.judgments, { 3: 1, 7: 1 });
  }
});

test("done envelope with done status becomes terminal with the curve F1", () => {
  const done = status({
    phase: "done",
    stop_reason: "budget_exhausted",
    curve: [
      { cycle: 0, labels_spent: 5, f1: 0.4 },
      { cycle: 1, labels_spent: 10, f1: 0.75 },
    ],
  });
  const state = reduce(labeling(), {
    type: "envelope",
    envelope: envelope({ phase: "done", pending: null, status: done }),
  });
  assert.equal(state.kind, "terminal");
  if (state.kind === "terminal") {
    assert.equal(state.finalF1, 0.75);
  }
});

test("terminal hides F1 when the dataset has no evaluation labels", () => {
  const done = status({ phase: "done", f1_available: false });
  const state = reduce(labeling(), { type: "status", status: done });
  assert.equal(state.kind, "terminal");
  if (state.kind === "terminal") {
    assert.equal(state.finalF1, null);
  }
});

test("network errors back off exponentially and cap", () => {
  let state: UiState = labeling();
  state = reduce(state, { type: "network_error", message: "down" });
  assert.equal(state.kind, "error");
  let last = 0;
  for (let i = 0; i < 10; i++) {
    state = reduce(state, { type: "network_error", message: "down" });
    if (state.kind === "error") {
      assert.ok(state.retryMs >= last);
      last = state.retryMs;
    }
  }
  if (state.kind === "error") {
    assert.equal(state.retryMs, 30_000);
  }
});
