// Browser entry: a minimal collage editor against the local service.
// Build with `npm run build` and serve index.html + dist/ from any static
// file server; the service URL is read from ?service=... (default
// http://127.0.0.1:8321).
import { ApiClient } from "./apiClient";
import { canvasPngCodec } from "./canvasCodec";
import { EditorState } from "./editorState";
import { applyRectangle, applyStroke, fullMask } from "./maskBrush";
import { renderPreview } from "./preview";
import type { RgbImage } from "./types";

const params = new URLSearchParams(window.location.search);
const serviceUrl = params.get("service") ?? "http://127.0.0.1:8321";
const api = new ApiClient(serviceUrl);

const SIZE = 64;
const state = new EditorState(SIZE, SIZE);

const previewCanvas = document.getElementById("preview") as HTMLCanvasElement;
const compositeImg = document.getElementById("composite") as HTMLImageElement;
const statusLine = document.getElementById("status") as HTMLElement;
const modelSelect = document.getElementById("model") as HTMLSelectElement;
const toolSelect = document.getElementById("tool") as HTMLSelectElement;
const layerList = document.getElementById("layers") as HTMLElement;

function drawPreview(): void {
  const { composite, unionMask } = renderPreview(state.layers, SIZE, SIZE);
  const ctx = previewCanvas.getContext("2d")!;
  const imageData = ctx.createImageData(SIZE, SIZE);
  for (let i = 0; i < SIZE * SIZE; i++) {
    imageData.data[i * 4] = composite.data[i * 3];
    imageData.data[i * 4 + 1] = composite.data[i * 3 + 1];
    imageData.data[i * 4 + 2] = composite.data[i * 3 + 2];
    // show unknown pixels as transparent checker handled by CSS background
    imageData.data[i * 4 + 3] = unionMask.data[i] ? 255 : 32;
  }
  ctx.putImageData(imageData, 0, 0);
  renderLayerList();
}

function renderLayerList(): void {
  layerList.innerHTML = "";
  for (const layer of [...state.layers].sort((a, b) => b.zOrder - a.zOrder)) {
    const row = document.createElement("div");
    row.textContent = `${layer.name} (z=${layer.zOrder})`;
    const up = document.createElement("button");
    up.textContent = "up";
    up.onclick = () => {
      state.setLayerOrder(layer.id, layer.zOrder + 1);
      drawPreview();
    };
    const del = document.createElement("button");
    del.textContent = "x";
    del.onclick = () => {
      state.removeLayer(layer.id);
      drawPreview();
    };
    row.append(" ", up, " ", del);
    layerList.append(row);
  }
}

async function refreshModels(): Promise<void> {
  const models = await api.models();
  modelSelect.innerHTML = "";
  for (const m of models) {
    const option = document.createElement("option");
    option.value = m.model_id;
    option.textContent = m.model_id;
    modelSelect.append(option);
  }
  state.selectedModelId = models[0]?.model_id ?? null;
}

async function samplePart(): Promise<void> {
  if (!state.selectedModelId) return;
  const seed = Math.floor(Math.random() * 1_000_000);
  const [imageB64] = await api.generate(state.selectedModelId, seed, 1);
  const image: RgbImage = canvasPngCodec.decodeRgb(imageB64);
  state.addLayer(image, fullMask(SIZE, SIZE), `sample ${seed}`);
  drawPreview();
}

async function submit(): Promise<void> {
  if (!state.canSubmit) {
    statusLine.textContent = "add at least one layer first";
    return;
  }
  statusLine.textContent = "composing…";
  const t0 = performance.now();
  try {
    const result = await api.compose(state.selectedModelId!, state.toSpec(canvasPngCodec));
    if (result === null) return; // superseded by a newer submission
    state.lastComposite = { compositeB64: result.compositeB64, timingMs: result.timingMs };
    compositeImg.src = `data:image/png;base64,${result.compositeB64}`;
    statusLine.textContent = `server ${result.timingMs.toFixed(0)} ms, round trip ${(
      performance.now() - t0
    ).toFixed(0)} ms`;
  } catch (err: any) {
    statusLine.textContent = `error: ${err?.body?.error ?? err}`;
  }
}

let drawing = false;
let rectStart: { x: number; y: number } | null = null;

function canvasPos(event: MouseEvent): { x: number; y: number } {
  const rect = previewCanvas.getBoundingClientRect();
  return {
    x: ((event.clientX - rect.left) / rect.width) * SIZE,
    y: ((event.clientY - rect.top) / rect.height) * SIZE,
  };
}

function topLayerId(): string | null {
  if (state.layers.length === 0) return null;
  return [...state.layers].sort((a, b) => b.zOrder - a.zOrder)[0].id;
}

previewCanvas.addEventListener("mousedown", (e) => {
  drawing = true;
  rectStart = canvasPos(e);
});
previewCanvas.addEventListener("mousemove", (e) => {
  if (!drawing) return;
  const tool = toolSelect.value;
  const id = topLayerId();
  if (!id) return;
  if (tool === "brush" || tool === "eraser") {
    const p = canvasPos(e);
    state.updateMask(id, (m) => applyStroke(m, [p], 4, tool === "eraser"));
    drawPreview();
  }
});
previewCanvas.addEventListener("mouseup", (e) => {
  drawing = false;
  const tool = toolSelect.value;
  const id = topLayerId();
  if (!id || !rectStart) return;
  if (tool === "rectangle") {
    const p = canvasPos(e);
    state.updateMask(id, (m) =>
      applyRectangle(
        m,
        Math.round(rectStart!.x),
        Math.round(rectStart!.y),
        Math.round(p.x),
        Math.round(p.y),
      ),
    );
    drawPreview();
  }
  rectStart = null;
});

(document.getElementById("sample") as HTMLButtonElement).onclick = () => void samplePart();
(document.getElementById("compose") as HTMLButtonElement).onclick = () => void submit();
(document.getElementById("undo") as HTMLButtonElement).onclick = () => {
  state.undo();
  drawPreview();
};
(document.getElementById("redo") as HTMLButtonElement).onclick = () => {
  state.redo();
  drawPreview();
};
modelSelect.onchange = () => {
  state.selectedModelId = modelSelect.value;
};

void refreshModels().then(drawPreview);
