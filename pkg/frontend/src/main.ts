import { SceneApi } from "./api";
import { EditorController } from "./ui";

async function boot(): Promise<void> {
  const root = document.getElementById("editor");
  if (!root) {
    throw new Error("missing #editor mount point");
  }
  const controller = await EditorController.boot(new SceneApi(""), root);
  (window as unknown as { editor: EditorController }).editor = controller;
}

void boot();
