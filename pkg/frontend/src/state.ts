// Optimistic scene-view state. Edits apply locally right away and queue up;
// commit() flushes the queue in user-action order, re-renders server-side,
// and refreshes from the server, which stays the source of truth.
// Serializing commits (one in flight at a time) is the controller's job.

import type { SceneApi } from "./api";
import type { ObjectView, SceneDoc, SceneEdit } from "./types";

export type SceneView = {
  canvas: [number, number];
  objects: ObjectView[];
  pending: SceneEdit[];
  dirty: boolean;
  compositeVersion: number;
  error: string | null;
};

export function viewFromScene(doc: SceneDoc): SceneView {
  return {
    canvas: doc.canvas,
    objects: doc.objects.map((o) => ({ ...o })),
    pending: [],
    dirty: false,
    compositeVersion: 0,
    error: null,
  };
}

function applyLocally(objects: ObjectView[], edit: SceneEdit): ObjectView[] {
  if (edit.op === "remove") {
    return objects.filter((o) => o.id !== edit.object_id);
  }
  return objects.map((o) => {
    if (o.id !== edit.object_id) return o;
    switch (edit.op) {
      case "move":
        return {
          ...o,
          origin: [o.origin[0] + (edit.dx ?? 0), o.origin[1] + (edit.dy ?? 0)],
          z_layer: o.z_layer + (edit.dz ?? 0),
        };
      case "set_visibility":
        return { ...o, visible: edit.visible ?? o.visible };
      case "set_scale":
        return { ...o, scale: edit.scale ?? o.scale };
      case "tune":
        return { ...o, prompt: edit.prompt ?? o.prompt };
      default:
        return o;
    }
  });
}

function validateEdit(view: SceneView, edit: SceneEdit): string | null {
  if (!view.objects.some((o) => o.id === edit.object_id)) {
    return `no object ${edit.object_id} in the scene`;
  }
  if (edit.op === "set_scale" && !(typeof edit.scale === "number" && edit.scale > 0)) {
    return "scale must be > 0";
  }
  if (edit.op === "tune" && !edit.prompt) {
    return "tune needs a prompt";
  }
  return null;
}

export function stageEdit(view: SceneView, edit: SceneEdit): SceneView {
  const problem = validateEdit(view, edit);
  if (problem) {
    // surface the error; objects and the pending queue stay unchanged
    return { ...view, error: problem };
  }
  return {
    ...view,
    objects: applyLocally(view.objects, edit),
    pending: [...view.pending, edit],
    dirty: true,
    error: null,
  };
}

export async function commit(view: SceneView, api: SceneApi): Promise<SceneView> {
  if (!view.dirty || view.pending.length === 0) {
    return view;
  }
  const queue = [...view.pending];
  try {
    await api.postEdits(queue);
    await api.renderComposite();
    const doc = await api.getScene();
    return {
      ...viewFromScene(doc),
      compositeVersion: view.compositeVersion + 1,
    };
  } catch (err) {
    // server kept its old scene; retain the queue so the user can retry
    return {
      ...view,
      error: err instanceof Error ? err.message : String(err),
    };
  }
}

export async function refresh(view: SceneView, api: SceneApi): Promise<SceneView> {
  const doc = await api.getScene();
  return { ...viewFromScene(doc), compositeVersion: view.compositeVersion };
}
