/** Wire and view types shared by the bridge and the browser app. */

export interface AuditEntryDoc {
  sequence: number;
  timestamp: number;
  appId: string;
  context: string | null;
  requestedScopes: string[];
  authorizedScopes: string[];
  absentScopes: string[];
  outcome: string;
  prevHash: string;
  entryHash: string;
}

export interface ConsentEventMsg {
  messageType: "consent.event";
  transactionId: string;
  appId: string;
  context: "SIGN_IN" | "SIGN_UP";
  truncatedScopes: string[];
  deadline: number;
}

export interface SchemaRow {
  field: string;
  drawer: string;
  tier: string;
}

export interface AppRow {
  appId: string;
  tier: string;
  effectiveTier: string;
  revoked: boolean;
}

export interface BridgeState {
  attached: boolean;
  trustMode: string | null;
  secretSource: "file" | "pasted" | null;
}

export interface LedgerResponse {
  entries: AuditEntryDoc[];
  chainHead: string;
  serverValid: boolean;
}

/** Events pushed to the browser over the SSE stream. */
export type DashboardEvent =
  | { kind: "consent"; prompt: ConsentEventMsg }
  | { kind: "attach"; state: BridgeState }
  | {
      kind: "outcome";
      transactionId: string;
      accepted: boolean;
      reason?: string;
    };
