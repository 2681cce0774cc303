export type SceneEditOp = "move" | "remove" | "set_visibility" | "set_scale" | "tune";

export type SceneEdit = {
  op: SceneEditOp;
  object_id: number;
  dx?: number;
  dy?: number;
  dz?: number;
  visible?: boolean;
  scale?: number;
  prompt?: string;
};

export type ObjectView = {
  id: number;
  class: string;
  confidence: number;
  origin: [number, number];
  z_layer: number;
  scale: number;
  visible: boolean;
  prompt: string | null;
  thumbnail?: string;
};

export type SceneDoc = {
  canvas: [number, number];
  objects: ObjectView[];
};

export type StageManifestView = {
  stage_name: string;
  stage_index: number;
  backend_id: string;
  outputs: [string, string][];
};
