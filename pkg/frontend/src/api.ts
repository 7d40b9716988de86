/**
 * Typed client for the annotation service HTTP API.
 *
 * Judgment submission is retried through an idempotent queue: the service
 * treats a resubmission of the same (task, annotator, label) as a no-op,
 * so a lost response never produces a duplicate judgment.
 */

export type JudgmentLabel = "CORRECT" | "INCORRECT_CLAIM" | "CORRECT_BUT_UNRELATED";

export const LABELS: readonly JudgmentLabel[] = [
  "CORRECT",
  "INCORRECT_CLAIM",
  "CORRECT_BUT_UNRELATED",
];

export interface TaskFlags {
  equals_correct: boolean;
  equals_incorrect: boolean;
}

export interface TaskView {
  task_id: string;
  evidence: string[];
  incorrect_claim: string;
  correct_claim: string;
  proposed_claim: string;
  flags: TaskFlags;
}

export interface SubmitAck {
  status: string;
  duplicate?: boolean;
}

export class LeaseExpiredError extends Error {}
export class ConflictError extends Error {}

type FetchLike = typeof fetch;

export interface ClientOptions {
  baseUrl?: string;
  fetchFn?: FetchLike;
  retryDelayMs?: number;
  maxRetries?: number;
}

async function sleep(ms: number): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, ms));
}

export class AnnotClient {
  private baseUrl: string;
  private fetchFn: FetchLike;
  private retryDelayMs: number;
  private maxRetries: number;

  constructor(options: ClientOptions = {}) {
    this.baseUrl = options.baseUrl ?? "";
    this.fetchFn = options.fetchFn ?? fetch.bind(globalThis);
    this.retryDelayMs = options.retryDelayMs ?? 1000;
    this.maxRetries = options.maxRetries ?? 5;
  }

  private async postJson(path: string, body: unknown): Promise<Response> {
    return this.fetchFn(`${this.baseUrl}${path}`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
  }

  async register(name: string): Promise<string> {
    const resp = await this.postJson("/annotators", { name });
    if (!resp.ok) {
      throw new Error(`registration failed: ${resp.status}`);
    }
    const data = (await resp.json()) as { annotator_id: string };
    return data.annotator_id;
  }

  async nextTask(annotatorId: string): Promise<TaskView | null> {
    const resp = await this.fetchFn(
      `${this.baseUrl}/tasks/next?annotator_id=${encodeURIComponent(annotatorId)}`,
    );
    if (!resp.ok) {
      throw new Error(`task fetch failed: ${resp.status}`);
    }
    const data = (await resp.json()) as { task: TaskView | null };
    return data.task;
  }

  /**
   * Submit one judgment; network failures retry the identical payload.
   * Resolves on ack, throws LeaseExpiredError / ConflictError on rejection.
   */
  async submitJudgment(
    annotatorId: string,
    taskId: string,
    label: JudgmentLabel,
  ): Promise<SubmitAck> {
    let lastError: unknown = null;
    for (let attempt = 0; attempt <= this.maxRetries; attempt++) {
      if (attempt > 0) {
        await sleep(this.retryDelayMs);
      }
      let resp: Response;
      try {
        resp = await this.postJson("/judgments", {
          task_id: taskId,
          annotator_id: annotatorId,
          label,
        });
      } catch (err) {
        lastError = err; // offline: keep the task, retry the same payload
        continue;
      }
      if (resp.ok) {
        return (await resp.json()) as SubmitAck;
      }
      if (resp.status === 409) {
        throw new ConflictError(`conflicting judgment for ${taskId}`);
      }
      const detail = await resp.text();
      if (resp.status === 400 && detail.includes("lease expired")) {
        throw new LeaseExpiredError(detail);
      }
      throw new Error(`submit failed: ${resp.status} ${detail}`);
    }
    throw new Error(`submit kept failing offline: ${String(lastError)}`);
  }
}
