import type { SceneDoc, SceneEdit, StageManifestView } from "./types";

export class ApiError extends Error {
  constructor(message: string, readonly status: number) {
    super(message);
  }
}

async function readError(res: Response): Promise<string> {
  try {
    const body = (await res.json()) as { error?: string };
    return body.error ?? `HTTP ${res.status}`;
  } catch {
    return `HTTP ${res.status}`;
  }
}

export class SceneApi {
  constructor(readonly baseUrl: string = "") {}

  private async requestJson<T>(path: string, init?: RequestInit): Promise<T> {
    const res = await fetch(`${this.baseUrl}${path}`, init);
    if (!res.ok) {
      throw new ApiError(await readError(res), res.status);
    }
    return (await res.json()) as T;
  }

  getScene(): Promise<SceneDoc> {
    return this.requestJson<SceneDoc>("/api/scene");
  }

  async postEdits(edits: SceneEdit[]): Promise<number> {
    const result = await this.requestJson<{ applied: number }>("/api/scene/edits", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(edits),
    });
    return result.applied;
  }

  async renderComposite(): Promise<Blob> {
    const res = await fetch(`${this.baseUrl}/api/render`, { method: "POST" });
    if (!res.ok) {
      throw new ApiError(await readError(res), res.status);
    }
    return res.blob();
  }

  async tuneObject(objectId: number, prompt: string): Promise<void> {
    await this.requestJson<{ tuned: number }>(`/api/objects/${objectId}/tune`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ prompt }),
    });
  }

  getStages(): Promise<{ stages: StageManifestView[] }> {
    return this.requestJson<{ stages: StageManifestView[] }>("/api/stages");
  }

  imageUrl(stage: string, name: string): string {
    return `${this.baseUrl}/api/image/${stage}/${name}`;
  }
}
