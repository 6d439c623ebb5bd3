// Thin client for the composition service. Compose requests are
// single-flight: a new submission aborts the one in progress.
import type { CollageSpecJson, ComposeResult } from "./types";

export class ApiError extends Error {
  constructor(
    public readonly status: number,
    public readonly body: unknown,
  ) {
    super(`service error ${status}`);
  }
}

type FetchLike = typeof fetch;

export class ApiClient {
  private inFlight: AbortController | null = null;

  constructor(
    private readonly baseUrl: string,
    private readonly fetchImpl: FetchLike = fetch,
  ) {}

  private async post(path: string, body: unknown, signal?: AbortSignal): Promise<any> {
    const response = await this.fetchImpl(`${this.baseUrl}${path}`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
      signal,
    });
    const payload = await response.json().catch(() => null);
    if (!response.ok) {
      throw new ApiError(response.status, payload);
    }
    return payload;
  }

  /** Aborts any compose already in flight; resolves null when superseded. */
  async compose(
    modelId: string,
    spec: CollageSpecJson,
    refineSteps = 0,
  ): Promise<ComposeResult | null> {
    this.inFlight?.abort();
    const controller = new AbortController();
    this.inFlight = controller;
    try {
      const body = await this.post(
        "/v1/compose",
        { model_id: modelId, collage_spec: spec, refine_steps: refineSteps },
        controller.signal,
      );
      return {
        compositeB64: body.composite,
        latent: body.latent,
        unionMaskB64: body.union_mask,
        timingMs: body.timing_ms,
      };
    } catch (err) {
      if (controller.signal.aborted) {
        return null;
      }
      throw err;
    } finally {
      if (this.inFlight === controller) {
        this.inFlight = null;
      }
    }
  }

  get hasInFlight(): boolean {
    return this.inFlight !== null;
  }

  async models(): Promise<Array<{ model_id: string; session: boolean }>> {
    const response = await this.fetchImpl(`${this.baseUrl}/v1/models`);
    if (!response.ok) {
      throw new ApiError(response.status, await response.json().catch(() => null));
    }
    return response.json();
  }

  async generate(modelId: string, seed: number, count: number): Promise<string[]> {
    const body = await this.post("/v1/generate", { model_id: modelId, seed, count });
    return body.images;
  }

  async encodeImage(modelId: string, imageB64: string, maskB64?: string): Promise<any> {
    return this.post("/v1/encode", {
      model_id: modelId,
      image: imageB64,
      ...(maskB64 ? { mask: maskB64 } : {}),
    });
  }

  async finetune(modelId: string, imageB64: string, steps = 30): Promise<string> {
    const body = await this.post("/v1/finetune", {
      model_id: modelId,
      image: imageB64,
      steps,
    });
    return body.session_model_id;
  }
}
