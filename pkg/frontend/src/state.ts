/** Console state machine.
 *
 * The UI state is a pure function of the last service response: judgments
 * are the only client-side input, nothing is applied optimistically, and a
 * 409 stale-revision answer locks the tab read-only.
 */

import type {
  PendingBatch,
  ServiceError,
  SessionEnvelope,
  SessionStatus,
} from "./api.js";

export type Judgment = 0 | 1;

export interface LabelingState {
  kind: "labeling";
  sessionId: string;
  revision: number;
  batch: PendingBatch;
  status: SessionStatus | null;
  judgments: Record<number, Judgment>;
  submitting: boolean;
}

export interface TerminalState {
  kind: "terminal";
  sessionId: string;
  status: SessionStatus;
  finalF1: number | null;
}

export type UiState =
  | { kind: "loading"; sessionId: string }
  | { kind: "training"; sessionId: string; status: SessionStatus | null }
  | LabelingState
  | TerminalState
  | { kind: "stale_locked"; sessionId: string; status: SessionStatus | null; message: string }
  | { kind: "error"; sessionId: string; message: string; retryMs: number };

export type UiEvent =
  | { type: "envelope"; envelope: SessionEnvelope }
  | { type: "status"; status: SessionStatus }
  | { type: "judge"; index: number; label: Judgment }
  | { type: "submit_started" }
  | { type: "submit_failed"; httpStatus: number; error: ServiceError }
  | { type: "network_error"; message: string };

const INITIAL_RETRY_MS = 1000;
const MAX_RETRY_MS = 30_000;

export function initialState(sessionId: string): UiState {
  return { kind: "loading", sessionId };
}

function statusOf(state: UiState): SessionStatus | null {
  return "status" in state ? state.status : null;
}

function finalF1(status: SessionStatus): number | null {
  if (!status.f1_available || status.curve.length === 0) return null;
  const last = status.curve[status.curve.length - 1];
  return last ? last.f1 : null;
}

/** Fold a service envelope (create/pending/labels response) into UI state. */
function fromEnvelope(sessionId: string, envelope: SessionEnvelope, previous: UiState): UiState {
  const status = envelope.status ?? statusOf(previous);
  if (envelope.phase === "done" || envelope.pending === null) {
    if (status && status.phase === "done") {
      return { kind: "terminal", sessionId, status, finalF1: finalF1(status) };
    }
    // terminal but the summary has not arrived yet: keep polling
    return { kind: "loading", sessionId };
  }
  if (envelope.phase === "training") {
    return { kind: "training", sessionId, status };
  }
  return {
    kind: "labeling",
    sessionId,
    revision: envelope.revision,
    batch: envelope.pending,
    status,
    judgments: {},
    submitting: false,
  };
}

export function reduce(state: UiState, event: UiEvent): UiState {
  const sessionId = state.sessionId;
  switch (event.type) {
    case "envelope": {
      if (state.kind === "stale_locked") return state; // stays read-only
      return fromEnvelope(sessionId, event.envelope, state);
    }
    case "status": {
      const status = event.status;
      if (state.kind === "stale_locked") {
        return { ...state, status };
      }
      if (status.phase === "done") {
        return { kind: "terminal", sessionId, status, finalF1: finalF1(status) };
      }
      if (state.kind === "labeling") {
        if (status.revision !== state.revision) {
          // someone else advanced the session; this tab is stale
          return {
            kind: "stale_locked",
            sessionId,
            status,
            message: "Session advanced in another tab; this tab is read-only.",
          };
        }
        return { ...state, status };
      }
      if (status.phase === "training") {
        return { kind: "training", sessionId, status };
      }
      return state.kind === "training"
        ? { kind: "loading", sessionId }
        : state;
    }
    case "judge": {
      if (state.kind !== "labeling" || state.submitting) return state;
      const inBatch = state.batch.instances.some((i) => i.index === event.index);
      if (!inBatch) return state;
      return {
        ...state,
        judgments: { ...state.judgments, [event.index]: event.label },
      };
    }
    case "submit_started": {
      if (state.kind !== "labeling") return state;
      return { ...state, submitting: true };
    }
    case "submit_failed": {
      if (event.httpStatus === 409 && event.error.code === "stale_revision") {
        return {
          kind: "stale_locked",
          sessionId,
          status: statusOf(state),
          message: event.error.message,
        };
      }
      if (event.httpStatus === 409) {
        // wrong phase: refresh from the service
        return { kind: "loading", sessionId };
      }
      if (state.kind === "labeling") {
        // 422: surface the service message, keep judgments for correction
        return { ...state, submitting: false };
      }
      return state;
    }
    case "network_error": {
      const retryMs =
        state.kind === "error"
          ? Math.min(state.retryMs * 2, MAX_RETRY_MS)
          : INITIAL_RETRY_MS;
      return { kind: "error", sessionId, message: event.message, retryMs };
    }
  }
}

/** All cards judged and nothing in flight: the batch may be submitted. */
export function readyToSubmit(state: UiState): state is LabelingState {
  return (
    state.kind === "labeling" &&
    !state.submitting &&
    state.batch.instances.every((i) => state.judgments[i.index] !== undefined)
  );
}

export function judgmentsPayload(state: LabelingState): Record<string, Judgment> {
  const payload: Record<string, Judgment> = {};
  for (const instance of state.batch.instances) {
    const label = state.judgments[instance.index];
    if (label === undefined) throw new Error(`instance ${instance.index} not judged`);
    payload[String(instance.index)] = label;
  }
  return payload;
}
