/** Browser bootstrap: wires the service client, the state machine, and the
 * renderers to the DOM. All session state comes from service responses; this
 * file only routes events. */

import { ServiceClient } from "./api.js";
import { renderApp } from "./cards.js";
import { PollLoop } from "./poll.js";
import {
  initialState,
  judgmentsPayload,
  readyToSubmit,
  reduce,
  type Judgment,
  type UiState,
} from "./state.js";

const app = document.getElementById("app") as HTMLElement;
const setup = document.getElementById("setup") as HTMLFormElement;

let client: ServiceClient | null = null;
let state: UiState | null = null;
let poll: PollLoop | null = null;

function render(): void {
  if (state !== null) {
    app.innerHTML = renderApp(state);
  }
}

function dispatch(event: Parameters<typeof reduce>[1]): void {
  if (state === null) return;
  state = reduce(state, event);
  render();
}

async function refreshStatus(): Promise<boolean> {
  if (client === null || state === null) return true;
  try {
    const result = await client.fetchStatus(state.sessionId);
    if (result.ok) {
      dispatch({ type: "status", status: result.body });
      return true;
    }
    return true; // service answered; a 4xx is not a connectivity problem
  } catch (err) {
    dispatch({ type: "network_error", message: String(err) });
    return false;
  }
}

async function refreshPending(): Promise<void> {
  if (client === null || state === null) return;
  try {
    const result = await client.fetchPending(state.sessionId);
    if (result.ok) {
      dispatch({ type: "envelope", envelope: result.body });
    }
  } catch (err) {
    dispatch({ type: "network_error", message: String(err) });
  }
}

async function submitBatch(): Promise<void> {
  if (client === null || state === null || !readyToSubmit(state)) return;
  const labels = judgmentsPayload(state);
  const revision = state.revision;
  const sessionId = state.sessionId;
  dispatch({ type: "submit_started" });
  try {
    const result = await client.submitLabels(sessionId, labels, revision);
    if (result.ok) {
      dispatch({ type: "envelope", envelope: result.body });
      await refreshStatus();
    } else {
      dispatch({
        type: "submit_failed",
        httpStatus: result.status,
        error: result.error,
      });
    }
  } catch (err) {
    dispatch({ type: "network_error", message: String(err) });
  }
}

app.addEventListener("click", (raw) => {
  const target = raw.target as HTMLElement;
  if (target.matches("button.judge")) {
    const index = Number(target.dataset.index);
    const label = Number(target.dataset.label) as Judgment;
    dispatch({ type: "judge", index, label });
  } else if (target.id === "submit-batch") {
    void submitBatch();
  } else if (target.closest(".banner.error")) {
    void refreshPending();
  }
});

setup.addEventListener("submit", (raw) => {
  raw.preventDefault();
  void (async () => {
    const base = (document.getElementById("service-url") as HTMLInputElement).value;
    const file = (document.getElementById("csv-file") as HTMLInputElement).files?.[0];
    const nInitial = Number((document.getElementById("n-initial") as HTMLInputElement).value);
    const budget = Number((document.getElementById("budget") as HTMLInputElement).value);
    const mode = (document.getElementById("initial-mode") as HTMLSelectElement)
      .value as "external" | "trusted";
    if (!file) return;
    client = new ServiceClient(base);
    const uploaded = await client.uploadDataset(await file.text());
    if (!uploaded.ok) {
      app.innerHTML = `<section class="banner error">upload failed: ${uploaded.error.message}</section>`;
      return;
    }
    const created = await client.createSession(
      uploaded.body.dataset_id,
      {
        classifier: { kind: "gbdt" },
        n_initial: nInitial,
        budget,
        init_method: "lof",
        k_per_cycle: 1,
        seed: 0,
      },
      mode,
    );
    if (!created.ok) {
      app.innerHTML = `<section class="banner error">session failed: ${created.error.message}</section>`;
      return;
    }
    setup.hidden = true;
    state = initialState(created.body.session_id);
    dispatch({ type: "envelope", envelope: created.body });
    poll?.stop();
    poll = new PollLoop(refreshStatus, 1500);
    poll.start();
  })();
});
