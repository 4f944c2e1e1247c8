// End-to-end: drives the console's controller/state layer over the real
// HTTP + WebSocket protocol against a live gateway running the banking
// fixture. The gateway is spawned from this test unless GATEWAY_URL points
// at one already running.
import assert from "node:assert/strict";
import { after, before, test } from "node:test";
import { spawn } from "node:child_process";
import { setTimeout as sleep } from "node:timers/promises";
import path from "node:path";
import { GatewayClient } from "../src/api.js";
import { ChatController } from "../src/controller.js";
const PORT = 8765 + (process.pid % 500);
const BASE = process.env.GATEWAY_URL ?? `http://127.0.0.1:${PORT}`;
const REPO_ROOT = path.resolve(process.cwd(), "..");
let server = null;
async function waitForGateway(timeoutMs = 20000) {
    const deadline = Date.now() + timeoutMs;
    while (Date.now() < deadline) {
        try {
            const response = await fetch(`${BASE}/api/apps/banking/agents`);
            if (response.ok) {
                return;
            }
        }
        catch {
            // not up yet
        }
        await sleep(250);
    }
    throw new Error(`gateway did not come up at ${BASE}`);
}
before(async () => {
    if (!process.env.GATEWAY_URL) {
        server = spawn("lpar", ["serve", "--config", "fixtures/banking.json", "--port", String(PORT)], { cwd: REPO_ROOT, stdio: "ignore" });
    }
    await waitForGateway();
});
after(() => {
    server?.kill();
});
async function waitFor(predicate, what, timeoutMs = 10000) {
    const deadline = Date.now() + timeoutMs;
    while (Date.now() < deadline) {
        if (predicate()) {
            return;
        }
        await sleep(25);
    }
    throw new Error(`timed out waiting for ${what}`);
}
test("scripted session: five banking turns, handover banner, rating change", async () => {
    const gateway = new GatewayClient(BASE);
    const controller = new ChatController(gateway, () => { });
    await controller.connect("banking", `e2e-${Date.now()}`);
    await waitFor(() => controller.state.connection === "open", "websocket open");
    const turns = [
        { text: "what is my balance", agent: "Balance and Transaction Agent", replyHas: "account number" },
        { text: "12345678", agent: "Balance and Transaction Agent", replyHas: "2,450.10" },
        { text: "where is the nearest atm", agent: "Branch and ATM Finder Agent", replyHas: "city or postcode" },
        { text: "springfield", agent: "Branch and ATM Finder Agent", replyHas: "12 High Street" },
        { text: "who are you", agent: "Branch and ATM Finder Agent", replyHas: "Branch and ATM Finder Agent" },
    ];
    let expected = controller.state.transcript.length;
    for (const turn of turns) {
        controller.send(turn.text);
        expected += 2; // the user entry plus the bot reply
        await waitFor(() => controller.state.transcript.length >= expected, `reply to ${JSON.stringify(turn.text)}`);
        const last = controller.state.transcript.at(-1);
        assert.equal(last.speaker, "bot");
        assert.equal(last.agentName, turn.agent, `turn "${turn.text}" served by ${last.agentName}`);
        if (turn.replyHas) {
            assert.ok(last.text.includes(turn.replyHas), `reply "${last.text}" contains "${turn.replyHas}"`);
        }
        assert.equal(controller.state.currentAgent, turn.agent);
    }
    // Context carry-over is visible in the context panel after the turns.
    await waitFor(() => controller.state.context.entities.account_id === "12345678", "context refresh");
    // The explicit request flips the session and raises the banner.
    controller.send("talk to a human");
    await waitFor(() => controller.state.handedOver && controller.state.handoverReason !== null, "handover banner");
    assert.equal(controller.state.handoverReason, "explicit_request");
    assert.equal(controller.state.currentAgent, "Connect Agent");
    // Three 5-scores move the rating band shown in the agents panel.
    const beforeRows = await controller.agentsPanel();
    assert.equal(beforeRows.find((a) => a.agent_id === "pay-1")?.rating, "Beginner");
    for (let i = 0; i < 3; i++) {
        await controller.submitFeedback("pay-1", 5);
    }
    const afterRows = await controller.agentsPanel();
    assert.equal(afterRows.find((a) => a.agent_id === "pay-1")?.rating, "Expert");
    controller.close();
});
