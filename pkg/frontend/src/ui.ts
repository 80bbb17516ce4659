// DOM layer: renders the editor from EditorState and wires edits back in.
// Slider ranges always come from the server's block registry, never from
// constants here.

import type { ApiClient } from "./api.js";
import type { EditorState } from "./state.js";
import type { PreviewLoop } from "./preview.js";
import type { BlockSchema, Diagnostic, LayerName, StyleDoc } from "./types.js";

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  cls?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (cls) node.className = cls;
  if (text !== undefined) node.textContent = text;
  return node;
}

export class EditorView {
  private root: HTMLElement;
  private previewImg: HTMLImageElement;
  private banner: HTMLElement;
  private diagBox: HTMLElement;
  private imageSelect: HTMLSelectElement;
  private presetSelect: HTMLSelectElement;
  private dragSource: { layer: LayerName; index: number } | null = null;

  constructor(
    container: HTMLElement,
    private readonly state: EditorState,
    private readonly api: ApiClient,
    private readonly loop: PreviewLoop,
  ) {
    this.root = container;
    this.previewImg = el("img", "preview-image");
    this.banner = el("div", "banner hidden");
    this.diagBox = el("div", "diagnostics");
    this.imageSelect = el("select");
    this.presetSelect = el("select");
    this.state.subscribe(() => {
      this.renderLayers();
      this.loop.request(this.state.style);
    });
  }

  showImage(blob: Blob): void {
    const url = URL.createObjectURL(blob);
    const old = this.previewImg.src;
    this.previewImg.src = url;
    if (old.startsWith("blob:")) URL.revokeObjectURL(old);
    this.banner.classList.add("hidden");
    this.diagBox.replaceChildren();
  }

  showDiagnostics(diags: Diagnostic[]): void {
    this.diagBox.replaceChildren(
      ...diags.map((d) => el("p", "diag", `${d.layer}[${d.index}] ${d.code}: ${d.message}`)),
    );
  }

  showError(err: Error): void {
    this.banner.textContent = `server unreachable or failed: ${err.message} (retrying on next edit)`;
    this.banner.classList.remove("hidden");
  }

  async mount(): Promise<void> {
    const header = el("header");
    const title = el("h1", undefined, "style editor");
    header.append(title);

    // image picker
    const images = await this.api.images();
    for (const name of images) {
      const opt = el("option", undefined, name) as HTMLOptionElement;
      opt.value = name;
      this.imageSelect.append(opt);
    }
    if (images.length > 0) this.loop.imageId = images[0]!;
    this.imageSelect.addEventListener("change", () => {
      this.loop.imageId = this.imageSelect.value;
      this.loop.requestNow(this.state.style);
    });

    // presets
    const presets = await this.api.presets();
    const placeholder = el("option", undefined, "load preset...") as HTMLOptionElement;
    placeholder.value = "";
    this.presetSelect.append(placeholder);
    for (const name of Object.keys(presets).sort()) {
      const opt = el("option", undefined, name) as HTMLOptionElement;
      opt.value = name;
      this.presetSelect.append(opt);
    }
    this.presetSelect.addEventListener("change", () => {
      const chosen = this.presetSelect.value;
      if (chosen && presets[chosen]) this.state.load(presets[chosen]!);
    });

    const exportBtn = el("button", undefined, "export JSON");
    exportBtn.addEventListener("click", () => this.exportStyle());
    const saveBtn = el("button", undefined, "save to server");
    saveBtn.addEventListener("click", () => {
      void this.api.saveStyle(this.state.style.name || "untitled", this.state.export());
    });

    const controls = el("div", "controls");
    controls.append(this.imageSelect, this.presetSelect, exportBtn, saveBtn);
    header.append(controls);

    const layers = el("div", "layers");
    layers.append(
      this.layerColumn("background", "background (color)"),
      this.layerColumn("foreground", "foreground (lines / alpha)"),
    );

    const preview = el("div", "preview");
    preview.append(this.previewImg, this.banner, this.diagBox);

    this.root.replaceChildren(header, layers, preview);
    this.renderLayers();
    this.loop.requestNow(this.state.style);
  }

  private layerColumn(layer: LayerName, label: string): HTMLElement {
    const column = el("section", `layer layer-${layer}`);
    column.append(el("h2", undefined, label));
    const list = el("div", "block-list");
    list.dataset.layer = layer;
    column.append(list);

    const palette = el("select") as HTMLSelectElement;
    const hint = el("option", undefined, "add block...") as HTMLOptionElement;
    hint.value = "";
    palette.append(hint);
    for (const kind of this.state.kinds()) {
      const opt = el("option", undefined, kind) as HTMLOptionElement;
      opt.value = kind;
      palette.append(opt);
    }
    palette.addEventListener("change", () => {
      if (palette.value) {
        this.state.addBlock(layer, palette.value);
        palette.value = "";
      }
    });
    column.append(palette);
    return column;
  }

  private renderLayers(): void {
    for (const layer of ["background", "foreground"] as LayerName[]) {
      const list = this.root.querySelector<HTMLElement>(
        `.block-list[data-layer="${layer}"]`,
      );
      if (!list) continue;
      list.replaceChildren(
        ...this.state.style[layer].map((block, index) =>
          this.blockCard(layer, index, block.kind, block.params, block.enabled),
        ),
      );
    }
  }

  private blockCard(
    layer: LayerName,
    index: number,
    kind: string,
    params: StyleDoc["background"][number]["params"],
    enabled: boolean,
  ): HTMLElement {
    const card = el("div", enabled ? "block" : "block disabled");
    card.draggable = true;
    card.addEventListener("dragstart", () => {
      this.dragSource = { layer, index };
    });
    card.addEventListener("dragover", (ev) => ev.preventDefault());
    card.addEventListener("drop", (ev) => {
      ev.preventDefault();
      if (this.dragSource && this.dragSource.layer === layer) {
        this.state.moveBlock(layer, this.dragSource.index, index);
      }
      this.dragSource = null;
    });

    const head = el("div", "block-head");
    head.append(el("span", "kind", kind));
    const toggle = el("button", "toggle", enabled ? "on" : "off");
    toggle.addEventListener("click", () => this.state.toggleBlock(layer, index));
    const remove = el("button", "remove", "x");
    remove.addEventListener("click", () => this.state.removeBlock(layer, index));
    head.append(toggle, remove);
    card.append(head);

    const schema = this.state.schema(kind);
    if (schema) {
      for (const [name, spec] of Object.entries(schema.params)) {
        card.append(this.paramControl(layer, index, name, spec, params[name]));
      }
    }
    return card;
  }

  private paramControl(
    layer: LayerName,
    index: number,
    name: string,
    spec: BlockSchema["params"][string],
    value: number | string | undefined,
  ): HTMLElement {
    const row = el("label", "param");
    row.append(el("span", "param-name", name));
    if (spec.type === "enum") {
      const select = el("select") as HTMLSelectElement;
      for (const choice of spec.choices ?? []) {
        const opt = el("option", undefined, choice) as HTMLOptionElement;
        opt.value = choice;
        select.append(opt);
      }
      select.value = String(value ?? spec.default);
      select.addEventListener("change", () =>
        this.state.updateParam(layer, index, name, select.value),
      );
      row.append(select);
    } else if (spec.type === "model") {
      const input = el("input") as HTMLInputElement;
      input.type = "text";
      input.value = String(value ?? spec.default ?? "");
      input.placeholder = "model name (optional)";
      input.addEventListener("change", () =>
        this.state.updateParam(layer, index, name, input.value),
      );
      row.append(input);
    } else {
      const slider = el("input") as HTMLInputElement;
      slider.type = "range";
      // ranges come from the registry; fall back to a unit range only if
      // the server omitted bounds
      const lo = spec.minimum ?? 0;
      const hi = spec.maximum ?? 1;
      slider.min = String(lo);
      slider.max = String(hi);
      slider.step = spec.type === "int" ? "1" : String((hi - lo) / 200);
      slider.value = String(value ?? spec.default);
      const readout = el("span", "param-value", String(value ?? spec.default));
      slider.addEventListener("input", () => {
        const v = Number(slider.value);
        readout.textContent = slider.value;
        this.state.updateParam(layer, index, name, v);
      });
      row.append(slider, readout);
    }
    return row;
  }

  private exportStyle(): void {
    const doc = this.state.export();
    const blob = new Blob([JSON.stringify(doc, null, 2) + "\n"], {
      type: "application/json",
    });
    const a = el("a") as HTMLAnchorElement;
    a.href = URL.createObjectURL(blob);
    a.download = `${doc.name || "style"}.json`;
    a.click();
    URL.revokeObjectURL(a.href);
  }
}
