/** Chat console: a round timeline, one input box, inline errors with retry.
 *
 * The client performs no analysis of its own; it renders exactly what the
 * service's payload schemas deliver. One round may be in flight at a time.
 */

import { ApiClient } from "./api.js";
import { renderPayload } from "./renderers/index.js";
import type { RoundResponse } from "./types.js";

export class ChatApp {
  readonly timeline: HTMLElement;
  readonly input: HTMLInputElement;
  readonly sendButton: HTMLButtonElement;
  readonly errorBanner: HTMLElement;
  private sessionId: string | null = null;
  private busy = false;
  private lastFailedText: string | null = null;

  constructor(readonly root: HTMLElement, readonly api: ApiClient) {
    root.innerHTML = "";
    this.timeline = document.createElement("div");
    this.timeline.className = "timeline";

    this.errorBanner = document.createElement("div");
    this.errorBanner.className = "error-banner hidden";

    const form = document.createElement("form");
    form.className = "composer";
    this.input = document.createElement("input");
    this.input.type = "text";
    this.input.placeholder = "Describe an analysis task...";
    this.sendButton = document.createElement("button");
    this.sendButton.type = "submit";
    this.sendButton.textContent = "Send";
    this.sendButton.disabled = true;
    form.append(this.input, this.sendButton);

    root.append(this.timeline, this.errorBanner, form);

    this.input.addEventListener("input", () => this.syncControls());
    form.addEventListener("submit", (event) => {
      event.preventDefault();
      void this.send(this.input.value);
    });
  }

  async start(bindings: Record<string, string> = {}): Promise<void> {
    const session = await this.api.createSession(bindings);
    this.sessionId = session.session_id;
  }

  get roundCount(): number {
    return this.timeline.querySelectorAll(".round").length;
  }

  syncControls(): void {
    this.sendButton.disabled = this.busy || this.input.value.trim() === "";
  }

  private showError(message: string, failedText: string): void {
    this.lastFailedText = failedText;
    this.errorBanner.innerHTML = "";
    this.errorBanner.classList.remove("hidden");
    const label = document.createElement("span");
    label.textContent = message;
    const retry = document.createElement("button");
    retry.type = "button";
    retry.className = "retry";
    retry.textContent = "Retry";
    retry.addEventListener("click", () => {
      if (this.lastFailedText !== null) void this.send(this.lastFailedText);
    });
    this.errorBanner.append(label, retry);
  }

  private clearError(): void {
    this.lastFailedText = null;
    this.errorBanner.classList.add("hidden");
    this.errorBanner.innerHTML = "";
  }

  async send(text: string): Promise<RoundResponse | null> {
    const trimmed = text.trim();
    if (!trimmed || this.busy || this.sessionId === null) return null;
    this.busy = true;
    this.syncControls();
    try {
      const response = await this.api.postRound(this.sessionId, trimmed);
      this.clearError();
      this.appendRound(trimmed, response);
      this.input.value = "";
      return response;
    } catch (error) {
      this.showError(
        error instanceof Error ? error.message : "request failed",
        trimmed,
      );
      return null;
    } finally {
      this.busy = false;
      this.syncControls();
    }
  }

  private appendRound(text: string, response: RoundResponse): void {
    const round = document.createElement("article");
    round.className = "round";
    round.dataset.index = String(response.round_index);

    const user = document.createElement("p");
    user.className = "user-text";
    user.textContent = text;
    round.appendChild(user);

    if (response.clarification) {
      const note = document.createElement("p");
      note.className = "clarification";
      note.textContent = response.clarification;
      round.appendChild(note);
    }
    for (const payload of response.payloads) {
      round.appendChild(renderPayload(payload));
    }
    this.timeline.appendChild(round);
  }
}
