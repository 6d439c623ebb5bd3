// Editor state: the layer stack (always exportable as a collage spec),
// the active tool, and bounded undo over layer edits.
import { exportSpec, nextLayerId } from "./collageSpec";
import type { CollageSpecJson, EditorLayer, MaskGrid, PngCodec, RgbImage, Tool } from "./types";
import { UndoStack } from "./undo";

interface Snapshot {
  layers: EditorLayer[];
}

function cloneLayers(layers: EditorLayer[]): EditorLayer[] {
  return layers.map((layer) => ({
    ...layer,
    image: { ...layer.image, data: new Uint8ClampedArray(layer.image.data) },
    mask: { ...layer.mask, data: new Uint8Array(layer.mask.data) },
  }));
}

export class EditorState {
  layers: EditorLayer[] = [];
  activeTool: Tool = "brush";
  selectedModelId: string | null = null;
  lastComposite: { compositeB64: string; timingMs: number } | null = null;
  private history = new UndoStack<Snapshot>((s) => ({ layers: cloneLayers(s.layers) }), 50);

  constructor(
    public readonly height: number,
    public readonly width: number,
  ) {}

  private checkpoint(): void {
    this.history.push({ layers: this.layers });
  }

  addLayer(image: RgbImage, mask: MaskGrid, name?: string): EditorLayer {
    this.checkpoint();
    const layer: EditorLayer = {
      id: nextLayerId(),
      name: name ?? `layer ${this.layers.length}`,
      image,
      mask,
      zOrder: this.layers.length,
    };
    this.layers = [...this.layers, layer];
    return layer;
  }

  removeLayer(id: string): void {
    this.checkpoint();
    this.layers = this.layers.filter((l) => l.id !== id);
  }

  setLayerOrder(id: string, zOrder: number): void {
    this.checkpoint();
    this.layers = this.layers.map((l) => (l.id === id ? { ...l, zOrder } : l));
  }

  updateMask(id: string, update: (mask: MaskGrid) => MaskGrid): void {
    this.checkpoint();
    this.layers = this.layers.map((l) => (l.id === id ? { ...l, mask: update(l.mask) } : l));
  }

  undo(): boolean {
    const prev = this.history.undo({ layers: this.layers });
    if (!prev) return false;
    this.layers = prev.layers;
    return true;
  }

  redo(): boolean {
    const next = this.history.redo({ layers: this.layers });
    if (!next) return false;
    this.layers = next.layers;
    return true;
  }

  get canSubmit(): boolean {
    return this.layers.length >= 1 && this.selectedModelId !== null;
  }

  toSpec(codec: PngCodec): CollageSpecJson {
    return exportSpec(this.layers, this.height, this.width, codec);
  }
}
