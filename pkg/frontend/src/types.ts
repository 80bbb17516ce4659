// Wire types mirroring the preview server's JSON contracts.

export interface BlockDoc {
  kind: string;
  params: Record<string, number | string>;
  enabled: boolean;
}

export type LayerName = "background" | "foreground";

export interface StyleDoc {
  version: "styler/1";
  name: string;
  background: BlockDoc[];
  foreground: BlockDoc[];
  composite_mode: "multiply" | "foreground-only" | "background-only";
  line_color: [number, number, number];
}

export interface ParamSchema {
  type: "int" | "float" | "enum" | "model";
  default: number | string;
  minimum?: number;
  maximum?: number;
  choices?: string[];
}

export interface BlockSchema {
  kind: string;
  description: string;
  params: Record<string, ParamSchema>;
  requires_channels: number | null;
}

export interface Diagnostic {
  layer: string;
  index: number;
  code: string;
  message: string;
}

export function emptyStyle(name = "untitled"): StyleDoc {
  return {
    version: "styler/1",
    name,
    background: [],
    foreground: [],
    composite_mode: "multiply",
    line_color: [0, 0, 0],
  };
}
