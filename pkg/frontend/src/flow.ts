/**
 * The participant decision flow as a transport-backed state machine:
 * compose (image + caption) -> intervention pop-up (legend, optionally a
 * fact of the day) -> post-type selection -> simulated hand-off.
 *
 * The machine is DOM-free so it can be driven by the real UI and by
 * scripted sessions alike.
 */

import { ApiClient, ApiError, ShareOutcome, newEventId } from "./api.js";
import { digestContent, imageIdentity } from "./hash.js";

export type Screen = "compose" | "popup" | "postType" | "confirmation" | "login";

export type PostType = "feed" | "story" | "direct";

export interface SelectedImage {
  name: string;
  byteLength: number;
}

export interface Session {
  sessionToken: string;
  userId: number;
}

export interface PopupState {
  legend: string;
  interventionToken: string;
  factNumber?: number;
  factText?: string;
}

export interface Notice {
  kind: "expired" | "error";
  message: string;
}

export class ParticipantFlow {
  screen: Screen = "compose";
  caption = "";
  image: SelectedImage | null = null;
  popup: PopupState | null = null;
  chosenPostType: PostType | null = null;
  notice: Notice | null = null;

  /** Pop-ups shown so far, keyed by local calendar day: the "fact of the
   * day #N" ordinal is the per-day display count. */
  private popupOrdinals = new Map<string, number>();
  private inFlight: Promise<Screen> | null = null;

  constructor(
    private readonly client: ApiClient,
    private readonly session: Session,
    private readonly now: () => Date = () => new Date(),
  ) {}

  setCaption(text: string): void {
    this.caption = text;
  }

  selectImage(image: SelectedImage): void {
    this.image = image;
  }

  /** SHARE! stays disabled until an image is selected; empty captions are
   * allowed. */
  canShare(): boolean {
    return this.screen === "compose" && this.image !== null && this.inFlight === null;
  }

  async submitShare(): Promise<Screen> {
    if (this.inFlight) {
      return this.inFlight;
    }
    if (this.screen !== "compose" || this.image === null) {
      throw new Error("nothing to share: select an image first");
    }
    this.inFlight = this.doSubmitShare(this.image);
    try {
      return await this.inFlight;
    } finally {
      this.inFlight = null;
    }
  }

  private async doSubmitShare(image: SelectedImage): Promise<Screen> {
    const userId = this.session.userId;
    const body = {
      session_token: this.session.sessionToken,
      client_event_id: newEventId(),
      post_length: this.caption.length,
      post_hash: await digestContent(userId, this.caption),
      image_hash: await digestContent(userId, imageIdentity(image.name, image.byteLength)),
      client_timestamp: this.now().toISOString(),
    };
    let outcome: ShareOutcome;
    try {
      outcome = await this.client.shareAttempt(body);
    } catch (error) {
      if (error instanceof ApiError && error.status === 401) {
        this.screen = "login";
        return this.screen;
      }
      throw error;
    }
    this.notice = null;
    if (outcome.decision === "pass") {
      this.popup = null;
      this.screen = "postType";
      return this.screen;
    }
    const popup: PopupState = {
      legend: outcome.legend,
      interventionToken: outcome.intervention_token as string,
    };
    if (outcome.message_text !== undefined) {
      popup.factText = outcome.message_text;
      popup.factNumber = this.nextPopupOrdinal();
    }
    this.popup = popup;
    this.screen = "popup";
    return this.screen;
  }

  async choosePopupAction(action: "edit" | "post"): Promise<Screen> {
    if (this.inFlight) {
      return this.inFlight;
    }
    if (this.screen !== "popup" || this.popup === null || this.image === null) {
      throw new Error("no live pop-up to act on");
    }
    this.inFlight = this.doChoosePopupAction(action, this.popup, this.image);
    try {
      return await this.inFlight;
    } finally {
      this.inFlight = null;
    }
  }

  private async doChoosePopupAction(
    action: "edit" | "post",
    popup: PopupState,
    image: SelectedImage,
  ): Promise<Screen> {
    const userId = this.session.userId;
    const body = {
      session_token: this.session.sessionToken,
      client_event_id: newEventId(),
      intervention_token: popup.interventionToken,
      action,
      post_length: this.caption.length,
      post_hash: await digestContent(userId, this.caption),
      image_hash: await digestContent(userId, imageIdentity(image.name, image.byteLength)),
    };
    try {
      await this.client.resolve(body);
    } catch (error) {
      if (error instanceof ApiError && error.status === 410) {
        // Pop-up sat too long; back to composing, a fresh attempt is needed.
        this.notice = { kind: "expired", message: "The pop-up expired. Share again when ready." };
        this.popup = null;
        this.screen = "compose";
        return this.screen;
      }
      throw error;
    }
    this.popup = null;
    if (action === "edit") {
      // Back to the composition screen with caption and image intact.
      this.screen = "compose";
    } else {
      this.screen = "postType";
    }
    return this.screen;
  }

  /** Feed, story, or direct message; the Instagram hand-off is simulated
   * by a confirmation screen. Nothing is sent: the platform records no
   * post-type information. */
  choosePostType(type: PostType): Screen {
    if (this.screen !== "postType") {
      throw new Error("post-type selection is not open");
    }
    this.chosenPostType = type;
    this.screen = "confirmation";
    return this.screen;
  }

  /** Start the next post: clears content, keeps the session. */
  startOver(): Screen {
    this.caption = "";
    this.image = null;
    this.popup = null;
    this.chosenPostType = null;
    this.screen = "compose";
    return this.screen;
  }

  private nextPopupOrdinal(): number {
    const day = this.now().toISOString().slice(0, 10);
    const next = (this.popupOrdinals.get(day) ?? 0) + 1;
    this.popupOrdinals.set(day, next);
    return next;
  }
}
