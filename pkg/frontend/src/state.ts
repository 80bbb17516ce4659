// Editor state: a StyleDoc plus mutation helpers. Every mutation bumps a
// revision counter and notifies subscribers; rendering and preview
// scheduling hang off those notifications.

import type { BlockDoc, BlockSchema, LayerName, StyleDoc } from "./types.js";
import { emptyStyle } from "./types.js";

export type Listener = (state: EditorState) => void;

export class EditorState {
  private doc: StyleDoc = emptyStyle();
  private listeners: Listener[] = [];
  revision = 0;

  constructor(private readonly registry: Map<string, BlockSchema>) {}

  static fromSchemas(schemas: BlockSchema[]): EditorState {
    return new EditorState(new Map(schemas.map((s) => [s.kind, s])));
  }

  subscribe(listener: Listener): () => void {
    this.listeners.push(listener);
    return () => {
      this.listeners = this.listeners.filter((l) => l !== listener);
    };
  }

  private touch(): void {
    this.revision += 1;
    for (const l of this.listeners) l(this);
  }

  get style(): StyleDoc {
    return this.doc;
  }

  schema(kind: string): BlockSchema | undefined {
    return this.registry.get(kind);
  }

  kinds(): string[] {
    return [...this.registry.keys()].sort();
  }

  /** Replace the whole document (preset load / import). */
  load(doc: StyleDoc): void {
    this.doc = structuredClone(doc);
    this.touch();
  }

  /** Deep snapshot for export; equals the loaded preset when untouched. */
  export(): StyleDoc {
    return structuredClone(this.doc);
  }

  addBlock(layer: LayerName, kind: string, index?: number): void {
    const schema = this.registry.get(kind);
    if (!schema) throw new Error(`unknown block kind ${kind}`);
    const params: BlockDoc["params"] = {};
    for (const [name, spec] of Object.entries(schema.params)) {
      params[name] = spec.default;
    }
    const block: BlockDoc = { kind, params, enabled: true };
    const list = [...this.doc[layer]];
    list.splice(index ?? list.length, 0, block);
    this.doc = { ...this.doc, [layer]: list };
    this.touch();
  }

  removeBlock(layer: LayerName, index: number): void {
    const list = [...this.doc[layer]];
    list.splice(index, 1);
    this.doc = { ...this.doc, [layer]: list };
    this.touch();
  }

  moveBlock(layer: LayerName, from: number, to: number): void {
    const list = [...this.doc[layer]];
    if (from < 0 || from >= list.length) return;
    const [block] = list.splice(from, 1);
    list.splice(Math.max(0, Math.min(to, list.length)), 0, block!);
    this.doc = { ...this.doc, [layer]: list };
    this.touch();
  }

  toggleBlock(layer: LayerName, index: number): void {
    const list = this.doc[layer].map((b, i) =>
      i === index ? { ...b, enabled: !b.enabled } : b,
    );
    this.doc = { ...this.doc, [layer]: list };
    this.touch();
  }

  /** Clamp to the registry range so the server never sees an illegal value. */
  updateParam(layer: LayerName, index: number, param: string, value: number | string): void {
    const block = this.doc[layer][index];
    if (!block) return;
    const spec = this.registry.get(block.kind)?.params[param];
    let next = value;
    if (spec && typeof next === "number") {
      if (spec.minimum !== undefined) next = Math.max(spec.minimum, next);
      if (spec.maximum !== undefined) next = Math.min(spec.maximum, next);
      if (spec.type === "int") next = Math.round(next);
    }
    const list = this.doc[layer].map((b, i) =>
      i === index ? { ...b, params: { ...b.params, [param]: next } } : b,
    );
    this.doc = { ...this.doc, [layer]: list };
    this.touch();
  }

  setName(name: string): void {
    this.doc = { ...this.doc, name };
    this.touch();
  }

  setCompositeMode(mode: StyleDoc["composite_mode"]): void {
    this.doc = { ...this.doc, composite_mode: mode };
    this.touch();
  }
}
