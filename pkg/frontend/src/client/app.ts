/**
 * Dashboard client.
 *
 * Renders live consent prompts (truncated field set only, with
 * drawer/tier badges), per-app revocation toggles, the drawer-grouped
 * profile editor, and the audit ledger with a client-side chain check
 * recomputed from the exported entries. Events arrive over SSE; all
 * mutations round-trip through the bridge, which holds no state of its
 * own.
 */

import { verifyChain } from "../shared/chain.js";
import type {
  AppRow,
  AuditEntryDoc,
  BridgeState,
  ConsentEventMsg,
  DashboardEvent,
  SchemaRow,
} from "../shared/types.js";

const PAGE_SIZE = 50;

const el = <T extends HTMLElement = HTMLElement>(id: string): T => {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
};

const state = {
  schema: new Map<string, SchemaRow>(),
  prompt: null as ConsentEventMsg | null,
  countdownTimer: 0,
  ledger: [] as AuditEntryDoc[],
  ledgerPage: 0,
};

async function api<T>(path: string, init?: RequestInit): Promise<T> {
  const response = await fetch(path, {
    headers: { "Content-Type": "application/json" },
    ...init,
  });
  const body = (await response.json()) as T & { error?: string };
  if (!response.ok) {
    throw new Error(body.error ?? `${path} failed (${response.status})`);
  }
  return body;
}

// -- attach / trust banner ----------------------------------------------------

function renderAttach(bridge: BridgeState): void {
  const status = el("attach-status");
  const form = el("attach-form");
  const banner = el("trust-banner");
  if (bridge.attached) {
    status.textContent = `consent surface attached (secret from ${bridge.secretSource})`;
    form.classList.add("hidden");
    banner.classList.remove("hidden");
    if (bridge.trustMode === "Verified") {
      banner.textContent = "Trust: Verified";
      banner.className = "banner ok";
    } else {
      banner.textContent =
        "Trust: Degraded — manifest tampering detected; all apps clamped to Standard tier";
      banner.className = "banner warn";
    }
    void refreshApps();
    void refreshProfile();
    void refreshLedger();
  } else {
    status.textContent = "not attached";
    form.classList.remove("hidden");
    banner.classList.add("hidden");
  }
}

el<HTMLFormElement>("secret-form").addEventListener("submit", (event) => {
  event.preventDefault();
  const secret = el<HTMLInputElement>("secret-input").value.trim();
  const errorBox = el("attach-error");
  errorBox.classList.add("hidden");
  api<BridgeState>("/api/attach", {
    method: "POST",
    body: JSON.stringify({ secret }),
  })
    .then(renderAttach)
    .catch((err: Error) => {
      errorBox.textContent = err.message;
      errorBox.classList.remove("hidden");
    });
});

// -- consent prompt -----------------------------------------------------------

function fieldBadge(field: string): string {
  const row = state.schema.get(field);
  if (!row) return "";
  const premium = row.tier === "Premium" ? " premium" : "";
  return `<span class="badge${premium}">${row.drawer} · ${row.tier}</span>`;
}

function renderPrompt(prompt: ConsentEventMsg): void {
  state.prompt = prompt;
  el("consent-idle").classList.add("hidden");
  el("consent-prompt").classList.remove("hidden");
  el("prompt-outcome").classList.add("hidden");
  el("prompt-app").textContent = prompt.appId;
  el("prompt-workflow").textContent =
    prompt.context === "SIGN_IN" ? "Sign-In" : "Sign-Up";
  el("prompt-fields").innerHTML = prompt.truncatedScopes
    .map((field) => `<li><span>${field}</span>${fieldBadge(field)}</li>`)
    .join("");
  setButtonsEnabled(true);
  const deadlineMs = prompt.deadline * 1000;
  clearInterval(state.countdownTimer);
  const tick = () => {
    const remaining = Math.max(0, Math.round((deadlineMs - Date.now()) / 1000));
    el("prompt-countdown").textContent = String(remaining);
    if (remaining <= 0) {
      clearInterval(state.countdownTimer);
      markOutcome("prompt expired", false);
    }
  };
  tick();
  state.countdownTimer = window.setInterval(tick, 1000);
}

function setButtonsEnabled(enabled: boolean): void {
  el<HTMLButtonElement>("approve-btn").disabled = !enabled;
  el<HTMLButtonElement>("deny-btn").disabled = !enabled;
}

function markOutcome(text: string, refresh: boolean): void {
  setButtonsEnabled(false);
  const outcome = el("prompt-outcome");
  outcome.textContent = text;
  outcome.classList.remove("hidden");
  if (refresh) void refreshLedger();
}

async function decide(decision: "Approved" | "Denied"): Promise<void> {
  if (!state.prompt) return;
  clearInterval(state.countdownTimer);
  try {
    const outcome = await api<{ accepted: boolean; reason?: string }>(
      "/api/decide",
      {
        method: "POST",
        body: JSON.stringify({
          transactionId: state.prompt.transactionId,
          decision,
        }),
      },
    );
    if (outcome.accepted) {
      markOutcome(
        decision === "Approved"
          ? "approved — fulfillment delivered"
          : "denied — app received 4003",
        true,
      );
    } else {
      markOutcome(`decision rejected: ${outcome.reason ?? "expired"}`, true);
    }
  } catch (err) {
    markOutcome(String(err), false);
  }
}

el("approve-btn").addEventListener("click", () => void decide("Approved"));
el("deny-btn").addEventListener("click", () => void decide("Denied"));

// -- apps ----------------------------------------------------------------------

async function refreshApps(): Promise<void> {
  const reply = await api<{ apps: AppRow[]; trustMode: string }>("/api/apps");
  const tbody = el("apps-table").querySelector("tbody")!;
  tbody.innerHTML = "";
  for (const app of reply.apps) {
    const row = document.createElement("tr");
    row.innerHTML =
      `<td>${app.appId}</td><td>${app.tier}</td><td>${app.effectiveTier}</td>`;
    const cell = document.createElement("td");
    const toggle = document.createElement("button");
    toggle.textContent = app.revoked ? "Re-grant" : "Revoke";
    if (!app.revoked) toggle.className = "deny";
    toggle.addEventListener("click", async () => {
      toggle.disabled = true;
      await api("/api/revoke", {
        method: "POST",
        body: JSON.stringify({ appId: app.appId, active: !app.revoked }),
      });
      await refreshApps();
      await refreshLedger();
    });
    cell.appendChild(toggle);
    if (app.revoked) {
      const note = document.createElement("span");
      note.className = "badge";
      note.textContent = "4004-gated";
      cell.appendChild(note);
    }
    row.appendChild(cell);
    tbody.appendChild(row);
  }
}

// -- profile --------------------------------------------------------------------

async function refreshProfile(): Promise<void> {
  const [schemaReply, profileReply] = await Promise.all([
    api<{ fields: SchemaRow[] }>("/api/schema"),
    api<{ values: Record<string, string> }>("/api/profile"),
  ]);
  state.schema = new Map(schemaReply.fields.map((row) => [row.field, row]));
  const editor = el("profile-editor");
  editor.innerHTML = "";
  const drawers = new Map<string, SchemaRow[]>();
  for (const row of schemaReply.fields) {
    const group = drawers.get(row.drawer) ?? [];
    group.push(row);
    drawers.set(row.drawer, group);
  }
  for (const [drawer, rows] of drawers) {
    const section = document.createElement("div");
    section.className = "profile-drawer";
    section.innerHTML = `<h3>${drawer} · ${rows[0]!.tier}</h3>`;
    for (const row of rows) {
      const line = document.createElement("div");
      line.className = "profile-row";
      const label = document.createElement("label");
      label.textContent = row.field;
      const input = document.createElement("input");
      input.dataset.field = row.field;
      input.maxLength = 64;
      input.value = profileReply.values[row.field] ?? "";
      line.append(label, input);
      section.appendChild(line);
    }
    editor.appendChild(section);
  }
}

el("profile-save").addEventListener("click", async () => {
  const values: Record<string, string> = {};
  for (const input of el("profile-editor").querySelectorAll("input")) {
    if (input.value) values[input.dataset.field!] = input.value;
  }
  await api("/api/profile", { method: "POST", body: JSON.stringify({ values }) });
  await refreshProfile();
});

el("purge-btn").addEventListener("click", async () => {
  const confirm = el<HTMLInputElement>("purge-confirm").value;
  await api("/api/purge", { method: "POST", body: JSON.stringify({ confirm }) });
  el<HTMLInputElement>("purge-confirm").value = "";
  await refreshProfile();
  await refreshLedger();
});

// -- ledger ----------------------------------------------------------------------

async function refreshLedger(): Promise<void> {
  const reply = await api<{
    entries: AuditEntryDoc[];
    chainHead: string;
    serverValid: boolean;
  }>("/api/ledger");
  state.ledger = reply.entries;
  const check = await verifyChain(reply.entries, reply.chainHead);
  const banner = el("chain-banner");
  if (check.valid && reply.serverValid) {
    banner.textContent = `chain valid — ${check.length} entries, head ${reply.chainHead.slice(0, 12)}…`;
    banner.className = "banner ok";
  } else {
    banner.textContent = `CHAIN INVALID — verification failed at entry ${check.failedAt ?? "?"}`;
    banner.className = "banner bad";
  }
  state.ledgerPage = Math.max(
    0,
    Math.ceil(state.ledger.length / PAGE_SIZE) - 1,
  );
  renderLedgerPage();
}

function renderLedgerPage(): void {
  const pages = Math.max(1, Math.ceil(state.ledger.length / PAGE_SIZE));
  state.ledgerPage = Math.min(state.ledgerPage, pages - 1);
  const start = state.ledgerPage * PAGE_SIZE;
  const rows = state.ledger.slice(start, start + PAGE_SIZE);
  el("ledger-pageinfo").textContent =
    `page ${state.ledgerPage + 1}/${pages} · ${state.ledger.length} entries`;
  const tbody = el("ledger-table").querySelector("tbody")!;
  tbody.innerHTML = rows
    .map(
      (entry) => `<tr>
        <td>${entry.sequence}</td>
        <td>${new Date(entry.timestamp * 1000).toISOString().replace(".000Z", "Z")}</td>
        <td>${entry.appId || "—"}</td>
        <td>${entry.context ?? "—"}</td>
        <td>${entry.requestedScopes.join(", ") || "—"}</td>
        <td>${entry.authorizedScopes.join(", ") || "—"}</td>
        <td>${entry.outcome}</td>
      </tr>`,
    )
    .join("");
}

el("ledger-refresh").addEventListener("click", () => void refreshLedger());
el("ledger-prev").addEventListener("click", () => {
  state.ledgerPage = Math.max(0, state.ledgerPage - 1);
  renderLedgerPage();
});
el("ledger-next").addEventListener("click", () => {
  state.ledgerPage += 1;
  renderLedgerPage();
});

// -- event stream ------------------------------------------------------------------

const events = new EventSource("/api/events");
events.onmessage = (message) => {
  const event = JSON.parse(message.data) as DashboardEvent;
  if (event.kind === "attach") {
    renderAttach(event.state);
  } else if (event.kind === "consent") {
    renderPrompt(event.prompt);
  } else if (event.kind === "outcome") {
    void refreshLedger();
  }
};

void api<BridgeState>("/api/state").then(renderAttach);
