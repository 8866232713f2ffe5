/**
 * Web bridge: serves the dashboard and translates between browser
 * HTTP/SSE and the middleware's operator socket channel.
 *
 * The browser never holds the operator secret unless the user pastes
 * one; by default the bridge reads it from the boot artifact file.
 * Consent events stream to the page over a persistent SSE connection,
 * so there is no polling in the consent path.
 */

import * as fs from "node:fs";
import * as path from "node:path";
import { fileURLToPath } from "node:url";

import express from "express";
import type { Request, Response } from "express";
import { z } from "zod";

import { OperatorChannel, OperatorError } from "./operator.js";
import type { BridgeState, DashboardEvent } from "../shared/types.js";

const decideSchema = z.object({
  transactionId: z.string().min(1),
  decision: z.enum(["Approved", "Denied"]),
});
const revokeSchema = z.object({ appId: z.string().min(1), active: z.boolean() });
const profileSchema = z.object({ values: z.record(z.string(), z.string()) });
const attachSchema = z.object({ secret: z.string().min(1) });

export interface BridgeOptions {
  socketPath: string;
  secretFile?: string;
  publicDir?: string;
}

export class DashboardBridge {
  readonly app: express.Express;
  private operator: OperatorChannel | null = null;
  private sseClients = new Set<Response>();
  private state: BridgeState = {
    attached: false,
    trustMode: null,
    secretSource: null,
  };

  constructor(private options: BridgeOptions) {
    this.app = express();
    this.app.use(express.json());
    const publicDir =
      options.publicDir ??
      path.join(path.dirname(fileURLToPath(import.meta.url)), "../../public");
    this.app.use(express.static(publicDir));
    this.routes();
  }

  /** Attach using the boot artifact secret when available. */
  async start(): Promise<void> {
    if (this.options.secretFile && fs.existsSync(this.options.secretFile)) {
      const secret = fs.readFileSync(this.options.secretFile, "utf-8").trim();
      await this.attachOperator(secret, "file");
    }
  }

  private async attachOperator(
    secret: string,
    source: "file" | "pasted",
  ): Promise<void> {
    const operator = new OperatorChannel(this.options.socketPath);
    await operator.connect();
    await operator.attach(secret);
    this.operator = operator;
    this.state = {
      attached: true,
      trustMode: operator.trustMode,
      secretSource: source,
    };
    operator.on("consent", (prompt) =>
      this.broadcast({ kind: "consent", prompt }),
    );
    operator.on("closed", () => {
      this.state = { attached: false, trustMode: null, secretSource: null };
      this.broadcast({ kind: "attach", state: this.state });
    });
    this.broadcast({ kind: "attach", state: this.state });
  }

  private broadcast(event: DashboardEvent): void {
    const payload = `data: ${JSON.stringify(event)}\n\n`;
    for (const client of this.sseClients) {
      client.write(payload);
    }
  }

  private requireOperator(): OperatorChannel {
    if (!this.operator || !this.state.attached) {
      throw new OperatorError("not attached to the consent surface");
    }
    return this.operator;
  }

  private routes(): void {
    const wrap =
      (handler: (req: Request, res: Response) => Promise<void>) =>
      (req: Request, res: Response) => {
        handler(req, res).catch((err) => {
          const message = err instanceof Error ? err.message : String(err);
          res.status(err instanceof OperatorError ? 502 : 400);
          res.json({ error: message });
        });
      };

    this.app.get("/api/state", (_req, res) => {
      res.json(this.state);
    });

    this.app.post(
      "/api/attach",
      wrap(async (req, res) => {
        const { secret } = attachSchema.parse(req.body);
        await this.attachOperator(secret, "pasted");
        res.json(this.state);
      }),
    );

    this.app.get("/api/events", (req, res) => {
      res.writeHead(200, {
        "Content-Type": "text/event-stream",
        "Cache-Control": "no-cache",
        Connection: "keep-alive",
      });
      res.write(
        `data: ${JSON.stringify({ kind: "attach", state: this.state })}\n\n`,
      );
      this.sseClients.add(res);
      req.on("close", () => this.sseClients.delete(res));
    });

    this.app.post(
      "/api/decide",
      wrap(async (req, res) => {
        const { transactionId, decision } = decideSchema.parse(req.body);
        const outcome = await this.requireOperator().decide(
          transactionId,
          decision === "Approved",
        );
        this.broadcast({ kind: "outcome", transactionId, ...outcome });
        res.json(outcome);
      }),
    );

    this.app.post(
      "/api/revoke",
      wrap(async (req, res) => {
        const { appId, active } = revokeSchema.parse(req.body);
        await this.requireOperator().setRevoked(appId, active);
        res.json({ appId, active });
      }),
    );

    this.app.get(
      "/api/apps",
      wrap(async (_req, res) => {
        res.json(await this.requireOperator().apps());
      }),
    );

    this.app.get(
      "/api/schema",
      wrap(async (_req, res) => {
        res.json(await this.requireOperator().schemaTable());
      }),
    );

    this.app.get(
      "/api/profile",
      wrap(async (_req, res) => {
        res.json(await this.requireOperator().profile());
      }),
    );

    this.app.post(
      "/api/profile",
      wrap(async (req, res) => {
        const { values } = profileSchema.parse(req.body);
        await this.requireOperator().setProfile(values);
        res.json({ ok: true });
      }),
    );

    this.app.post(
      "/api/purge",
      wrap(async (req, res) => {
        if (req.body?.confirm !== "PURGE") {
          res.status(400).json({ error: "typed confirmation required" });
          return;
        }
        await this.requireOperator().purge();
        res.json({ ok: true });
      }),
    );

    this.app.get(
      "/api/ledger",
      wrap(async (_req, res) => {
        const reply = await this.requireOperator().ledger();
        res.json({
          entries: reply.entries,
          chainHead: reply.chainHead,
          serverValid: reply.valid,
        });
      }),
    );

    this.app.get(
      "/api/ledger/export",
      wrap(async (_req, res) => {
        const reply = await this.requireOperator().ledger();
        const entries = reply.entries as Record<string, unknown>[];
        const lines = entries
          .map((entry) => JSON.stringify(entry))
          .join("\n");
        res.setHeader("Content-Type", "application/x-ndjson");
        res.setHeader(
          "Content-Disposition",
          "attachment; filename=audit-ledger.ndjson",
        );
        res.send(lines);
      }),
    );
  }

  stop(): void {
    this.operator?.close();
    for (const client of this.sseClients) {
      client.end();
    }
  }
}
