// UI convergence against a real `restorelab serve` process with fixture
// backends: staged edits committed through the client leave the server scene
// equal to the optimistic view, and the composite preview updates.

import { execFile, spawn, type ChildProcess } from "node:child_process";
import { mkdtempSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { promisify } from "node:util";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { SceneApi } from "../src/api";
import { commit, stageEdit, viewFromScene } from "../src/state";

const execFileAsync = promisify(execFile);
const HELPER = join(__dirname, "helpers", "make_run.py");

let server: ChildProcess | null = null;
let baseUrl = "";

async function waitForServer(url: string, timeoutMs = 30_000): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  for (;;) {
    try {
      const res = await fetch(`${url}/api/scene`);
      if (res.ok) return;
    } catch {
      // not up yet
    }
    if (Date.now() > deadline) throw new Error(`server at ${url} never became ready`);
    await new Promise((resolve) => setTimeout(resolve, 150));
  }
}

beforeAll(async () => {
  const workdir = mkdtempSync(join(tmpdir(), "restorelab-editor-"));
  const { stdout } = await execFileAsync("python3", [HELPER, workdir], { timeout: 45_000 });
  const runDir = stdout.trim();
  const port = 18_000 + Math.floor(Math.random() * 10_000);
  baseUrl = `http://127.0.0.1:${port}`;
  server = spawn("python3", ["-m", "restorelab.cli", "serve", "--run", runDir, "--port", String(port)], {
    stdio: "ignore",
  });
  await waitForServer(baseUrl);
});

afterAll(() => {
  server?.kill();
});

describe("editor convergence against restorelab serve", () => {
  it("committed move/visibility/remove edits converge with the server scene", async () => {
    const api = new SceneApi(baseUrl);
    let view = viewFromScene(await api.getScene());
    expect(view.objects.length).toBe(2);

    view = stageEdit(view, { op: "move", object_id: 0, dx: 10, dy: -4, dz: 1 });
    view = stageEdit(view, { op: "set_visibility", object_id: 1, visible: false });
    view = stageEdit(view, { op: "remove", object_id: 1 });
    expect(view.pending).toHaveLength(3);
    const optimistic = view.objects.map((o) => ({
      id: o.id,
      class: o.class,
      origin: o.origin,
      z_layer: o.z_layer,
      scale: o.scale,
      visible: o.visible,
      prompt: o.prompt,
    }));

    const committed = await commit(view, api);
    expect(committed.error).toBeNull();
    expect(committed.dirty).toBe(false);

    const serverDoc = await api.getScene();
    const serverView = serverDoc.objects.map((o) => ({
      id: o.id,
      class: o.class,
      origin: o.origin,
      z_layer: o.z_layer,
      scale: o.scale,
      visible: o.visible,
      prompt: o.prompt,
    }));
    expect(serverView).toEqual(optimistic);
  });

  it("render preview updates after commit", async () => {
    const before = await fetch(`${baseUrl}/api/image/compose/composite.png`);
    expect(before.ok).toBe(true);
    const originalBytes = new Uint8Array(await before.arrayBuffer());

    const edited = await fetch(`${baseUrl}/api/image/edits/composite.png`);
    expect(edited.ok).toBe(true);
    expect(edited.headers.get("content-type")).toBe("image/png");
    const editedBytes = new Uint8Array(await edited.arrayBuffer());

    // object 0 moved and object 1 vanished, so the preview must differ
    expect(Buffer.compare(Buffer.from(editedBytes), Buffer.from(originalBytes))).not.toBe(0);
  });

  it("server rejects edits on removed objects and the queue is retained", async () => {
    const api = new SceneApi(baseUrl);
    let view = viewFromScene(await api.getScene());
    // object 1 is gone server-side; force a stale edit past local validation
    view = { ...view, pending: [{ op: "move", object_id: 1, dx: 1, dy: 0, dz: 0 }], dirty: true };
    const after = await commit(view, api);
    expect(after.error).toMatch(/no object 1/);
    expect(after.pending).toHaveLength(1);
    expect(after.dirty).toBe(true);
  });
});
