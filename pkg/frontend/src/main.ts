// Bootstrap: fetch the registry, assemble state + preview loop + view.

import { ApiClient } from "./api.js";
import { EditorState } from "./state.js";
import { PreviewLoop } from "./preview.js";
import { EditorView } from "./ui.js";

async function boot(): Promise<void> {
  const container = document.getElementById("app");
  if (!container) throw new Error("missing #app container");
  const api = new ApiClient(window.location.origin);
  const schemas = await api.blocks();
  const state = EditorState.fromSchemas(schemas);
  let view: EditorView;
  const loop = new PreviewLoop(api, {
    onImage: (blob) => view.showImage(blob),
    onDiagnostics: (diags) => view.showDiagnostics(diags),
    onError: (err) => view.showError(err),
  }, "");
  view = new EditorView(container, state, api, loop);
  await view.mount();
}

boot().catch((err) => {
  const container = document.getElementById("app");
  if (container) {
    container.textContent = `failed to reach the preview server: ${err}`;
  }
});
