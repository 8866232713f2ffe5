/** Dashboard entry point: web bridge over the middleware socket. */

import { parseArgs } from "node:util";

import { DashboardBridge } from "./bridge.js";

const { values } = parseArgs({
  options: {
    socket: { type: "string", default: process.env.UDSS_SOCKET ?? "./udss.sock" },
    "secret-file": { type: "string", default: "./udss-keys/operator.secret" },
    port: { type: "string", default: "8787" },
  },
});

const bridge = new DashboardBridge({
  socketPath: values.socket!,
  secretFile: values["secret-file"],
});

bridge
  .start()
  .catch((err) => {
    console.error(`operator attach failed (${err}); paste the secret in the UI`);
  })
  .finally(() => {
    const port = Number(values.port);
    bridge.app.listen(port, () => {
      console.log(`privacy dashboard on http://localhost:${port}`);
      console.log(`middleware socket: ${values.socket}`);
    });
  });
