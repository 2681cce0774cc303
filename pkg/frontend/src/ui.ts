// DOM layer: object list with per-object controls, draggable overlays on the
// composite preview, and a commit bar. All mutations funnel through
// state.stageEdit / state.commit.

import { SceneApi } from "./api";
import { commit, refresh, stageEdit, viewFromScene, type SceneView } from "./state";
import type { SceneEdit } from "./types";

export class EditorController {
  view: SceneView;
  private chain: Promise<unknown> = Promise.resolve();

  constructor(
    readonly api: SceneApi,
    readonly root: HTMLElement,
    initial: SceneView,
  ) {
    this.view = initial;
  }

  static async boot(api: SceneApi, root: HTMLElement): Promise<EditorController> {
    const controller = new EditorController(api, root, viewFromScene(await api.getScene()));
    controller.renderDom();
    return controller;
  }

  stage(edit: SceneEdit): void {
    this.view = stageEdit(this.view, edit);
    this.renderDom();
  }

  commitPending(): Promise<void> {
    // one in-flight commit at a time; later commits queue behind it
    const step = this.chain.then(async () => {
      this.view = await commit(this.view, this.api);
      this.renderDom();
    });
    this.chain = step.catch(() => undefined);
    return step as Promise<void>;
  }

  async reload(): Promise<void> {
    this.view = await refresh(this.view, this.api);
    this.renderDom();
  }

  compositeUrl(): string {
    // cache-bust per committed render so the preview actually updates
    return `${this.api.baseUrl}/api/image/edits/composite.png?v=${this.view.compositeVersion}`;
  }

  renderDom(): void {
    this.root.replaceChildren(
      this.buildPreview(),
      this.buildObjectList(),
      this.buildCommitBar(),
    );
  }

  private buildPreview(): HTMLElement {
    const wrap = document.createElement("div");
    wrap.className = "preview";
    wrap.style.position = "relative";
    wrap.style.width = `${this.view.canvas[0]}px`;
    wrap.style.height = `${this.view.canvas[1]}px`;

    const img = document.createElement("img");
    img.className = "composite";
    img.alt = "composite preview";
    img.draggable = false;
    img.src = this.view.compositeVersion > 0
      ? this.compositeUrl()
      : `${this.api.baseUrl}/api/image/compose/composite.png`;
    wrap.appendChild(img);

    for (const obj of this.view.objects) {
      wrap.appendChild(this.buildDragHandle(obj.id, obj.origin));
    }
    return wrap;
  }

  private buildDragHandle(objectId: number, origin: [number, number]): HTMLElement {
    const handle = document.createElement("div");
    handle.className = "object-handle";
    handle.dataset.objectId = String(objectId);
    handle.style.position = "absolute";
    handle.style.left = `${origin[0]}px`;
    handle.style.top = `${origin[1]}px`;

    let start: [number, number] | null = null;
    handle.addEventListener("pointerdown", (event) => {
      start = [event.clientX, event.clientY];
      handle.setPointerCapture?.(event.pointerId);
    });
    handle.addEventListener("pointerup", (event) => {
      if (!start) return;
      const dx = Math.round(event.clientX - start[0]);
      const dy = Math.round(event.clientY - start[1]);
      start = null;
      if (dx !== 0 || dy !== 0) {
        this.stage({ op: "move", object_id: objectId, dx, dy, dz: 0 });
      }
    });
    return handle;
  }

  private buildObjectList(): HTMLElement {
    const list = document.createElement("ul");
    list.className = "objects";
    for (const obj of this.view.objects) {
      const item = document.createElement("li");
      item.dataset.objectId = String(obj.id);

      const label = document.createElement("span");
      label.className = "label";
      label.textContent = `#${obj.id} ${obj.class} (${obj.confidence.toFixed(2)}) z=${obj.z_layer}`;
      item.appendChild(label);

      item.appendChild(this.button("hide", obj.visible ? "hide" : "show", () =>
        this.stage({ op: "set_visibility", object_id: obj.id, visible: !obj.visible }),
      ));
      item.appendChild(this.button("z-up", "z+", () =>
        this.stage({ op: "move", object_id: obj.id, dx: 0, dy: 0, dz: 1 }),
      ));
      item.appendChild(this.button("z-down", "z-", () =>
        this.stage({ op: "move", object_id: obj.id, dx: 0, dy: 0, dz: -1 }),
      ));
      item.appendChild(this.button("remove", "remove", () =>
        this.stage({ op: "remove", object_id: obj.id }),
      ));

      const scale = document.createElement("input");
      scale.className = "scale";
      scale.type = "number";
      scale.step = "0.1";
      scale.min = "0.1";
      scale.value = String(obj.scale);
      scale.addEventListener("change", () => {
        const value = Number(scale.value);
        this.stage({ op: "set_scale", object_id: obj.id, scale: value });
      });
      item.appendChild(scale);

      const prompt = document.createElement("input");
      prompt.className = "prompt";
      prompt.type = "text";
      prompt.placeholder = "tuning prompt";
      prompt.value = obj.prompt ?? "";
      prompt.addEventListener("change", () => {
        if (prompt.value) {
          this.stage({ op: "tune", object_id: obj.id, prompt: prompt.value });
        }
      });
      item.appendChild(prompt);

      list.appendChild(item);
    }
    return list;
  }

  private buildCommitBar(): HTMLElement {
    const bar = document.createElement("div");
    bar.className = "commit-bar";

    const status = document.createElement("span");
    status.className = "status";
    status.textContent = this.view.error
      ? `error: ${this.view.error}`
      : this.view.dirty
        ? `${this.view.pending.length} pending edit(s)`
        : "in sync";
    bar.appendChild(status);

    const apply = document.createElement("button");
    apply.className = "commit";
    apply.textContent = "apply";
    apply.disabled = !this.view.dirty;
    apply.addEventListener("click", () => void this.commitPending());
    bar.appendChild(apply);

    return bar;
  }

  private button(className: string, text: string, onClick: () => void): HTMLButtonElement {
    const el = document.createElement("button");
    el.className = className;
    el.textContent = text;
    el.addEventListener("click", onClick);
    return el;
  }
}
