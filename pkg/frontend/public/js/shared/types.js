/** Wire and view types shared by the bridge and the browser app. */
export {};
